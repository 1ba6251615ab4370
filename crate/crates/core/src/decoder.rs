//! Hierarchical constrained beam search over the taxonomy trie.
//!
//! The beam starts as a single empty hypothesis with probability 1. At each
//! level every hypothesis expands over the trie's legal candidates for its
//! prefix, weighted by the scorer and normalized over that candidate set;
//! expansions are sorted by probability (ties broken by ascending digit
//! string) and pruned to the beam width. Because candidates only ever come
//! from the trie, every finished hypothesis is a legal code.

use std::cmp::Ordering;

use thiserror::Error;

use crate::scorer::{ScoreRequest, Scorer, ScorerError};
use crate::taxonomy::{Level, Segment, SegmentValue, TaxCode, TaxonomyError, TaxonomyTrie};
use crate::textprep::CleanedText;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("cannot decode a rejected description")]
    RejectedInput,
    #[error("beam width and return_n must satisfy 1 <= return_n <= width")]
    InvalidConfig,
}

/// Beam width and how many ranked predictions to return.
#[derive(Debug, Clone, Copy)]
pub struct BeamConfig {
    width: usize,
    return_n: usize,
}

impl BeamConfig {
    pub fn new(width: usize, return_n: usize) -> Result<Self, DecodeError> {
        if width == 0 || return_n == 0 || return_n > width {
            return Err(DecodeError::InvalidConfig);
        }
        Ok(Self { width, return_n })
    }

    /// Beam of `width`, returning only the best prediction.
    pub fn with_width(width: usize) -> Result<Self, DecodeError> {
        Self::new(width, 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn return_n(&self) -> usize {
        self.return_n
    }
}

impl Default for BeamConfig {
    /// Width 5 (an arbitrary, configurable default), best prediction only.
    fn default() -> Self {
        Self {
            width: 5,
            return_n: 1,
        }
    }
}

/// One step of a prediction's per-level trace.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub level: Level,
    pub value: SegmentValue,
    /// How many candidates were legal at this step.
    pub candidates: usize,
    /// Normalized probability of the chosen candidate within that set.
    pub probability: f64,
}

/// A finished, taxonomy-valid prediction.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub code: TaxCode,
    /// Product of the per-level normalized probabilities, in (0, 1].
    pub probability: f64,
    pub trace: Vec<TraceStep>,
    /// How many candidate sets along this path came back all-zero and fell
    /// back to uniform weights.
    pub fallback_events: u32,
}

#[derive(Debug, Clone)]
struct Hypothesis {
    prefix: Vec<Segment>,
    log_prob: f64,
    trace: Vec<TraceStep>,
    fallbacks: u32,
}

impl Hypothesis {
    fn root() -> Self {
        Self {
            prefix: Vec::new(),
            log_prob: 0.0,
            trace: Vec::new(),
            fallbacks: 0,
        }
    }

    fn values(&self) -> impl Iterator<Item = SegmentValue> + '_ {
        self.prefix.iter().map(|s| s.value)
    }

    fn into_prediction(self, kind: crate::taxonomy::CodeKind) -> Prediction {
        let code = TaxCode::new(kind, self.values().collect()).expect("full-depth trie path");
        Prediction {
            code,
            probability: self.log_prob.exp(),
            trace: self.trace,
            fallback_events: self.fallbacks,
        }
    }
}

/// Runs hierarchical constrained beam search and returns up to
/// `config.return_n` predictions, best first.
///
/// Probabilities accumulate in log space; zero-probability expansions are
/// dropped (every candidate set keeps at least one positive option after
/// normalization, so the beam never empties and returned probabilities are
/// strictly positive).
pub fn beam_search(
    trie: &TaxonomyTrie,
    scorer: &dyn Scorer,
    input_text: &str,
    config: BeamConfig,
) -> Result<Vec<Prediction>, DecodeError> {
    let kind = trie.kind();
    let mut beam = vec![Hypothesis::root()];

    for &level in kind.levels() {
        let mut expansions = Vec::with_capacity(beam.len() * 4);
        for hypothesis in &beam {
            let candidates = trie.valid_candidates(&hypothesis.prefix)?;
            let request = ScoreRequest::new(input_text, kind, &hypothesis.prefix, &candidates)?;
            let response = scorer.score(&request)?;
            if response.weights().len() != candidates.len() {
                return Err(ScorerError::ProtocolError(format!(
                    "scorer returned {} weights for {} candidates",
                    response.weights().len(),
                    candidates.len()
                ))
                .into());
            }

            let sum: f64 = response.weights().iter().sum();
            let fell_back = sum <= 0.0;
            let uniform = 1.0 / candidates.len() as f64;

            for (candidate, &weight) in candidates.iter().zip(response.weights()) {
                let probability = if fell_back { uniform } else { weight / sum };
                if probability <= 0.0 {
                    continue;
                }
                let mut prefix = hypothesis.prefix.clone();
                prefix.push(*candidate);
                let mut trace = hypothesis.trace.clone();
                trace.push(TraceStep {
                    level,
                    value: candidate.value,
                    candidates: candidates.len(),
                    probability,
                });
                expansions.push(Hypothesis {
                    prefix,
                    log_prob: hypothesis.log_prob + probability.ln(),
                    trace,
                    fallbacks: hypothesis.fallbacks + u32::from(fell_back),
                });
            }
        }

        expansions.sort_by(|a, b| {
            b.log_prob
                .partial_cmp(&a.log_prob)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.values().cmp(b.values()))
        });
        expansions.truncate(config.width);
        beam = expansions;
    }

    Ok(beam
        .into_iter()
        .take(config.return_n)
        .map(|h| h.into_prediction(kind))
        .collect())
}

/// Decodes a cleaned description, returning the single best prediction.
pub fn predict(
    trie: &TaxonomyTrie,
    scorer: &dyn Scorer,
    cleaned: &CleanedText,
    config: BeamConfig,
) -> Result<Prediction, DecodeError> {
    if cleaned.rejected() {
        return Err(DecodeError::RejectedInput);
    }
    let predictions = beam_search(trie, scorer, cleaned.text(), config)?;
    Ok(predictions
        .into_iter()
        .next()
        .expect("beam search over a non-empty trie yields a prediction"))
}
