//! Reference external scorer speaking the newline-delimited JSON protocol.
//!
//! Answers the `{"hello": 1}` handshake, then replies to every request with
//! uniform weights. Misbehaving modes exist for testing the engine's error
//! handling:
//!
//! ```text
//! scorer-stub [--mode uniform|negative|garbage|die]
//! ```

use std::io::{self, BufRead, Write};

use serde::Deserialize;
use serde_json::json;

#[derive(Deserialize)]
struct Request {
    id: u64,
    #[serde(default)]
    candidates: Vec<String>,
}

fn main() {
    let mut mode = "uniform".to_string();
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--mode" => mode = args.next().unwrap_or_default(),
            other => {
                eprintln!("scorer-stub: unknown argument {other:?}");
                std::process::exit(2);
            }
        }
    }

    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut lines = stdin.lock().lines();

    // Handshake.
    let Some(Ok(_hello)) = lines.next() else {
        return;
    };
    writeln!(out, "{}", json!({ "hello": 1 })).expect("stdout");
    out.flush().expect("stdout");

    for line in lines {
        let Ok(line) = line else { return };
        let request: Request = match serde_json::from_str(&line) {
            Ok(request) => request,
            Err(_) => return,
        };
        let reply = match mode.as_str() {
            "uniform" => {
                json!({ "id": request.id, "weights": vec![1.0; request.candidates.len()] })
                    .to_string()
            }
            "negative" => {
                json!({ "id": request.id, "weights": vec![-1.0; request.candidates.len()] })
                    .to_string()
            }
            "garbage" => "this is not a protocol reply".to_string(),
            "die" => return,
            other => {
                eprintln!("scorer-stub: unknown mode {other:?}");
                std::process::exit(2);
            }
        };
        writeln!(out, "{reply}").expect("stdout");
        out.flush().expect("stdout");
    }
}
