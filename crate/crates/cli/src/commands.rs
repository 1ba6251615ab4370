//! The five subcommands.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;

use taxcode::codec::emit_vocabulary;
use taxcode::decoder::{beam_search, BeamConfig, Prediction};
use taxcode::metrics::{evaluate, Date, EvalReport, LabeledPair};
use taxcode::scorer::{fit_similarity_scorer, ExternalScorer, Scorer, TableScorer, UniformScorer};
use taxcode::taxonomy::{CodeKind, SegmentValue, TaxCode, TaxonomyTrie};
use taxcode::textprep::{clean as clean_text, CleanConfig, CleanedText};

use crate::records::{
    open_input, open_taxonomy, read_dataset, read_jsonl, AlternativeOut, CleanOut, ErrorOut,
    PredictOut, PredictionRecord, RejectedOut, TraceOut,
};
use crate::CliError;

pub fn validate_taxonomy(taxonomy: &Path, kind: CodeKind) -> Result<(), CliError> {
    let trie = TaxonomyTrie::load_csv(open_taxonomy(taxonomy)?, kind)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "kind: {kind}")?;
    writeln!(out, "leaves: {}", trie.leaf_count())?;
    writeln!(out, "depth: {} (ok)", kind.depth())?;
    for (values, &level) in trie.values_by_level().iter().zip(kind.levels()) {
        writeln!(out, "{}s: {}", level.name(), values.len())?;
    }
    Ok(())
}

pub fn vocab(taxonomy: &Path, kind: CodeKind) -> Result<(), CliError> {
    let trie = TaxonomyTrie::load_csv(open_taxonomy(taxonomy)?, kind)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for token in emit_vocabulary(&trie) {
        writeln!(out, "{token}")?;
    }
    Ok(())
}

fn load_clean_config(path: Option<&Path>) -> Result<CleanConfig, CliError> {
    match path {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
            Ok(CleanConfig::from_reader(file)?)
        }
        None => Ok(CleanConfig::default()),
    }
}

pub fn clean(input: &str, config: Option<&Path>) -> Result<(), CliError> {
    let config = load_clean_config(config)?;
    let records = read_dataset(input)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for record in &records {
        let cleaned = clean_text(&record.description, &config);
        let line = serde_json::to_string(&CleanOut {
            id: &record.id,
            text: cleaned.text(),
            rejected: cleaned.rejected(),
            reason: cleaned.rejection_reason().map(|r| r.as_str()),
        })
        .expect("serializable");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub struct PredictArgs<'a> {
    pub input: &'a str,
    pub taxonomy: &'a Path,
    pub kind: CodeKind,
    pub scorer_spec: &'a str,
    pub config: Option<&'a Path>,
    pub beam_width: usize,
    pub top_n: usize,
    pub jobs: usize,
    pub scorer_timeout: u64,
    pub skip_errors: bool,
}

enum ScorerSpec<'a> {
    Uniform,
    Table(&'a str),
    Knn(&'a str, usize),
    External(&'a str),
}

fn parse_scorer_spec(spec: &str) -> Result<ScorerSpec<'_>, CliError> {
    if spec == "uniform" {
        return Ok(ScorerSpec::Uniform);
    }
    if let Some(path) = spec.strip_prefix("table:") {
        return Ok(ScorerSpec::Table(path));
    }
    if let Some(rest) = spec.strip_prefix("knn:") {
        let (path, k) = rest.rsplit_once(':').ok_or_else(|| {
            CliError::Usage(format!(
                "scorer spec {spec:?}: expected knn:<train_jsonl>:<k>"
            ))
        })?;
        let k = k.parse::<usize>().ok().filter(|&k| k >= 1).ok_or_else(|| {
            CliError::Usage(format!(
                "scorer spec {spec:?}: k must be a positive integer"
            ))
        })?;
        return Ok(ScorerSpec::Knn(path, k));
    }
    if let Some(command) = spec.strip_prefix("external:") {
        return Ok(ScorerSpec::External(command));
    }
    Err(CliError::Usage(format!(
        "unknown scorer spec {spec:?}: expected uniform, table:<path>, knn:<train>:<k> or external:<command>"
    )))
}

#[derive(Deserialize)]
struct TableRow {
    prefix: Vec<String>,
    candidate: String,
    weight: f64,
}

fn load_table_scorer(path: &str) -> Result<TableScorer, CliError> {
    let rows: Vec<TableRow> = read_jsonl(open_input(path)?, path)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (index, row) in rows.into_iter().enumerate() {
        let parse = |text: &str| {
            SegmentValue::parse(text).ok_or_else(|| {
                CliError::Data(format!(
                    "{path} entry {}: {text:?} is not a two-digit segment",
                    index + 1
                ))
            })
        };
        let prefix = row
            .prefix
            .iter()
            .map(|p| parse(p))
            .collect::<Result<Vec<_>, _>>()?;
        entries.push((prefix, parse(&row.candidate)?, row.weight));
    }
    // Weight validation failures describe file content, not a live scorer.
    TableScorer::from_entries(entries).map_err(|e| CliError::Data(format!("{path}: {e}")))
}

fn load_knn_scorer(
    path: &str,
    k: usize,
    kind: CodeKind,
    config: &CleanConfig,
) -> Result<Box<dyn Scorer>, CliError> {
    let records = read_dataset(path)?;
    let mut examples = Vec::with_capacity(records.len());
    for record in &records {
        let Some(code) = &record.code else {
            return Err(CliError::Data(format!(
                "{path}: training record {:?} has no code",
                record.id
            )));
        };
        let code = TaxCode::parse(kind, code)
            .map_err(|e| CliError::Data(format!("{path}: record {:?}: {e}", record.id)))?;
        let cleaned = clean_text(&record.description, config);
        if cleaned.rejected() {
            continue;
        }
        examples.push((cleaned.text().to_string(), code));
    }
    let scorer =
        fit_similarity_scorer(examples, k).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    Ok(Box::new(scorer))
}

pub fn predict(args: PredictArgs<'_>) -> Result<(), CliError> {
    let beam_config = BeamConfig::new(args.beam_width, args.top_n).map_err(|_| {
        CliError::Usage(format!(
            "--top-n {} and --beam-width {} must satisfy 1 <= top-n <= beam-width",
            args.top_n, args.beam_width
        ))
    })?;
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".to_string()));
    }

    let trie = TaxonomyTrie::load_csv(open_taxonomy(args.taxonomy)?, args.kind)?;
    let config = load_clean_config(args.config)?;
    let records = read_dataset(args.input)?;
    for record in &records {
        if let Some(code) = &record.code {
            TaxCode::parse(args.kind, code).map_err(|e| {
                CliError::Data(format!("{}: record {:?}: {e}", args.input, record.id))
            })?;
        }
    }

    let spec = parse_scorer_spec(args.scorer_spec)?;
    // The external protocol serializes request/response exchanges, so extra
    // workers would only contend on its lock.
    let jobs = match spec {
        ScorerSpec::External(_) => 1,
        _ => args.jobs,
    };
    let scorer: Box<dyn Scorer> = match spec {
        ScorerSpec::Uniform => Box::new(UniformScorer),
        ScorerSpec::Table(path) => Box::new(load_table_scorer(path)?),
        ScorerSpec::Knn(path, k) => load_knn_scorer(path, k, args.kind, &config)?,
        ScorerSpec::External(command) => Box::new(ExternalScorer::spawn_with_timeout(
            command,
            Duration::from_secs(args.scorer_timeout),
        )?),
    };

    let cleaned: Vec<CleanedText> = records
        .iter()
        .map(|r| clean_text(&r.description, &config))
        .collect();

    let decoded: Vec<Option<Result<Vec<Prediction>, CliError>>> =
        parallel_map_ordered(&cleaned, jobs, |cleaned| {
            if cleaned.rejected() {
                return None;
            }
            Some(
                beam_search(&trie, scorer.as_ref(), cleaned.text(), beam_config)
                    .map_err(CliError::from),
            )
        });

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for ((record, cleaned), result) in records.iter().zip(&cleaned).zip(decoded) {
        let line = match result {
            None => serde_json::to_string(&RejectedOut {
                id: &record.id,
                rejected: true,
                reason: cleaned
                    .rejection_reason()
                    .map(|r| r.as_str())
                    .unwrap_or("empty"),
            })
            .expect("serializable"),
            Some(Ok(predictions)) => render_prediction(&record.id, &predictions, args.top_n),
            Some(Err(err)) if args.skip_errors => serde_json::to_string(&ErrorOut {
                id: &record.id,
                error: err.message().to_string(),
            })
            .expect("serializable"),
            Some(Err(err)) => {
                return Err(match err {
                    CliError::Scorer(m) => CliError::Scorer(format!("record {:?}: {m}", record.id)),
                    CliError::Data(m) => CliError::Data(format!("record {:?}: {m}", record.id)),
                    usage => usage,
                });
            }
        };
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn render_prediction(id: &str, predictions: &[Prediction], top_n: usize) -> String {
    let best = &predictions[0];
    let trace = best
        .trace
        .iter()
        .map(|step| TraceOut {
            level: step.level.name(),
            value: step.value.to_string(),
            candidates: step.candidates,
            probability: step.probability,
        })
        .collect();
    let alternatives = (top_n > 1).then(|| {
        predictions[1..]
            .iter()
            .map(|p| AlternativeOut {
                code: p.code.digits(),
                probability: p.probability,
            })
            .collect()
    });
    serde_json::to_string(&PredictOut {
        id,
        code: best.code.digits(),
        probability: best.probability,
        trace,
        fallbacks: best.fallback_events,
        alternatives,
    })
    .expect("serializable")
}

/// Applies `f` to every item on `jobs` workers, preserving input order.
fn parallel_map_ordered<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(items.len()) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= items.len() {
                    break;
                }
                let result = f(&items[index]);
                *slots[index].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("slot filled"))
        .collect()
}

pub fn eval(predictions_path: &str, gold_path: &str) -> Result<(), CliError> {
    let predictions: Vec<PredictionRecord> =
        read_jsonl(open_input(predictions_path)?, predictions_path)?;
    let gold = read_dataset(gold_path)?;

    let mut by_id = std::collections::HashMap::with_capacity(predictions.len());
    for prediction in &predictions {
        if by_id.insert(prediction.id.as_str(), prediction).is_some() {
            return Err(CliError::Data(format!(
                "{predictions_path}: duplicate record id {:?}",
                prediction.id
            )));
        }
    }
    if predictions.len() != gold.len() {
        return Err(CliError::Data(format!(
            "id mismatch: {} predictions vs {} gold records",
            predictions.len(),
            gold.len()
        )));
    }

    let mut pairs = Vec::with_capacity(gold.len());
    for record in &gold {
        let prediction = by_id.remove(record.id.as_str()).ok_or_else(|| {
            CliError::Data(format!("id mismatch: no prediction for id {:?}", record.id))
        })?;
        let gold_code = record.code.as_deref().ok_or_else(|| {
            CliError::Data(format!(
                "{gold_path}: record {:?} has no gold code",
                record.id
            ))
        })?;
        let kind = infer_kind(gold_code).ok_or_else(|| {
            CliError::Data(format!(
                "{gold_path}: record {:?}: code {gold_code:?} is neither 8 nor 6 digits",
                record.id
            ))
        })?;
        let gold_code = TaxCode::parse(kind, gold_code)
            .map_err(|e| CliError::Data(format!("{gold_path}: record {:?}: {e}", record.id)))?;
        let predicted = prediction.code.as_deref().ok_or_else(|| {
            let detail = if prediction.rejected == Some(true) {
                "was rejected during cleaning"
            } else {
                "has no code"
            };
            CliError::Data(format!(
                "{predictions_path}: prediction {:?} {detail}; eval needs a code for every id",
                record.id
            ))
        })?;
        let predicted = TaxCode::parse(kind, predicted).map_err(|e| {
            CliError::Data(format!("{predictions_path}: record {:?}: {e}", record.id))
        })?;
        let timestamp = record
            .date
            .as_deref()
            .map(Date::parse)
            .transpose()
            .map_err(|e| CliError::Data(format!("{gold_path}: record {:?}: {e}", record.id)))?;
        pairs.push(LabeledPair::new(predicted, gold_code, timestamp)?);
    }

    let report = evaluate(&pairs)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "{}",
        serde_json::to_string(&report).expect("serializable")
    )?;
    write_report_table(&report, pairs[0].gold().kind());
    Ok(())
}

fn infer_kind(digits: &str) -> Option<CodeKind> {
    match digits.len() {
        8 => Some(CodeKind::Hsn),
        6 => Some(CodeKind::Sac),
        _ => None,
    }
}

/// Human-readable aligned table, printed to stderr so stdout stays pure JSON.
fn write_report_table(report: &EvalReport, kind: CodeKind) {
    let mut rows: Vec<(String, String)> = vec![
        (
            "macro_precision".to_string(),
            format!("{:.4}", report.macro_precision),
        ),
        (
            "macro_recall".to_string(),
            format!("{:.4}", report.macro_recall),
        ),
        ("macro_f1".to_string(), format!("{:.4}", report.macro_f1)),
        (
            "exact_match".to_string(),
            format!("{:.4}", report.exact_match),
        ),
    ];
    for (accuracy, &level) in report.per_level_accuracy.iter().zip(kind.levels()) {
        rows.push((
            format!("accuracy@{}", level.name()),
            format!("{accuracy:.4}"),
        ));
    }
    rows.push(("kappa".to_string(), format!("{:.4}", report.kappa)));
    if let Some(monthly) = &report.kappa_by_month {
        for bucket in monthly {
            let value = match bucket.kappa {
                Some(kappa) => format!("{kappa:.4}"),
                None => "degenerate".to_string(),
            };
            rows.push((format!("kappa@{}", bucket.month), value));
        }
    }
    let width = rows.iter().map(|(name, _)| name.len()).max().unwrap_or(0);
    eprintln!("{:<width$}  value", "metric");
    for (name, value) in rows {
        eprintln!("{name:<width$}  {value}");
    }
}
