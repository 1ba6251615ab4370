//! Child-process scorer speaking newline-delimited JSON.
//!
//! The engine starts the command, performs a `{"hello": 1}` handshake, then
//! sends one request object per score call and reads one response line back:
//!
//! ```text
//! -> {"hello": 1}
//! <- {"hello": 1}
//! -> {"id": 1, "input": "laptop", "kind": "HSN", "prefix": ["84"], "candidates": ["30", "70"]}
//! <- {"id": 1, "weights": [0.3, 0.7]}
//! ```
//!
//! Exchanges are strictly serialized: callers may share the scorer, but one
//! request is in flight at a time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError};

/// Default per-request (and handshake) timeout.
pub const DEFAULT_SCORER_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Serialize, Deserialize)]
struct Hello {
    hello: u32,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: u64,
    input: &'a str,
    kind: String,
    prefix: Vec<String>,
    candidates: Vec<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    id: u64,
    weights: Vec<f64>,
}

struct Exchange {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

/// Scorer backed by an external process.
pub struct ExternalScorer {
    exchange: Mutex<Exchange>,
    timeout: Duration,
}

impl ExternalScorer {
    /// Starts `command` through `sh -c` with the default timeout.
    pub fn spawn(command: &str) -> Result<Self, ScorerError> {
        Self::spawn_with_timeout(command, DEFAULT_SCORER_TIMEOUT)
    }

    pub fn spawn_with_timeout(command: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ScorerError::ScorerUnavailable(format!("failed to start: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");

        // A dedicated reader forwards stdout lines; a dropped sender tells us
        // the process went away.
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut scorer = Self {
            exchange: Mutex::new(Exchange {
                child,
                stdin,
                lines,
                next_id: 1,
            }),
            timeout,
        };
        scorer.handshake()?;
        Ok(scorer)
    }

    fn handshake(&mut self) -> Result<(), ScorerError> {
        let timeout = self.timeout;
        let exchange = self.exchange.get_mut().expect("no other users yet");
        let greeting = serde_json::to_string(&Hello { hello: 1 }).expect("serializable");
        write_line(&mut exchange.stdin, &greeting)?;
        let line = read_line(&exchange.lines, timeout)?;
        let reply: Hello = serde_json::from_str(&line)
            .map_err(|e| ScorerError::ProtocolError(format!("bad handshake reply: {e}")))?;
        if reply.hello != 1 {
            return Err(ScorerError::ProtocolError(format!(
                "unexpected handshake value {}",
                reply.hello
            )));
        }
        Ok(())
    }
}

impl Scorer for ExternalScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        let mut exchange = self
            .exchange
            .lock()
            .map_err(|_| ScorerError::ScorerUnavailable("scorer lock poisoned".to_string()))?;
        let id = exchange.next_id;
        exchange.next_id += 1;

        let wire = WireRequest {
            id,
            input: request.input(),
            kind: request.kind().to_string(),
            prefix: request
                .prefix()
                .iter()
                .map(|s| s.value.to_string())
                .collect(),
            candidates: request
                .candidates()
                .iter()
                .map(|s| s.value.to_string())
                .collect(),
        };
        let line = serde_json::to_string(&wire).expect("serializable");
        write_line(&mut exchange.stdin, &line)?;

        let line = read_line(&exchange.lines, self.timeout)?;
        let reply: WireResponse = serde_json::from_str(&line)
            .map_err(|e| ScorerError::ProtocolError(format!("bad reply: {e}")))?;
        if reply.id != id {
            return Err(ScorerError::ProtocolError(format!(
                "reply id {} does not match request id {id}",
                reply.id
            )));
        }
        if reply.weights.len() != request.candidates().len() {
            return Err(ScorerError::ProtocolError(format!(
                "expected {} weights, got {}",
                request.candidates().len(),
                reply.weights.len()
            )));
        }
        ScoreResponse::new(reply.weights)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(exchange) = self.exchange.get_mut() {
            let _ = exchange.child.kill();
            let _ = exchange.child.wait();
        }
    }
}

fn write_line(stdin: &mut ChildStdin, line: &str) -> Result<(), ScorerError> {
    stdin
        .write_all(line.as_bytes())
        .and_then(|_| stdin.write_all(b"\n"))
        .and_then(|_| stdin.flush())
        .map_err(|e| ScorerError::ScorerUnavailable(format!("write failed: {e}")))
}

fn read_line(
    lines: &Receiver<std::io::Result<String>>,
    timeout: Duration,
) -> Result<String, ScorerError> {
    match lines.recv_timeout(timeout) {
        Ok(Ok(line)) => Ok(line),
        Ok(Err(e)) => Err(ScorerError::ScorerUnavailable(format!("read failed: {e}"))),
        Err(RecvTimeoutError::Timeout) => Err(ScorerError::Timeout(timeout)),
        Err(RecvTimeoutError::Disconnected) => Err(ScorerError::ScorerUnavailable(
            "process closed its output".to_string(),
        )),
    }
}
