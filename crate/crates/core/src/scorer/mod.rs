//! Conditional-probability scorers feeding the decoder.
//!
//! A scorer answers one question: given the cleaned input text and a code
//! prefix, how should weight be spread over the legal next segments? Weights
//! are unnormalized non-negative reals; the decoder normalizes per candidate
//! set. An all-zero response is a degenerate signal the decoder answers with
//! a uniform fallback.

mod external;
mod knn;

pub use external::{ExternalScorer, DEFAULT_SCORER_TIMEOUT};
pub use knn::{fit_similarity_scorer, SimilarityScorer};

use std::collections::HashMap;
use std::time::Duration;

use thiserror::Error;

use crate::taxonomy::{CodeKind, Level, Segment, SegmentValue};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("scorer protocol error: {0}")]
    ProtocolError(String),
    #[error("scorer timed out after {0:?}")]
    Timeout(Duration),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training codes mix HSN and SAC")]
    MixedKinds,
    #[error("invalid weight {weight} for prefix {prefix:?}, candidate {candidate}")]
    InvalidWeight {
        prefix: String,
        candidate: String,
        weight: f64,
    },
    #[error("invalid score request: {0}")]
    InvalidRequest(String),
}

/// One scoring query: input text, the fixed prefix, and the legal candidates
/// for the next level.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    input: &'a str,
    kind: CodeKind,
    prefix: &'a [Segment],
    candidates: &'a [Segment],
}

impl<'a> ScoreRequest<'a> {
    /// Validates that candidates are non-empty, duplicate-free, all on one
    /// level, and that the level is the successor of the prefix.
    pub fn new(
        input: &'a str,
        kind: CodeKind,
        prefix: &'a [Segment],
        candidates: &'a [Segment],
    ) -> Result<Self, ScorerError> {
        let invalid = |message: String| Err(ScorerError::InvalidRequest(message));
        let Some(&expected_level) = kind.levels().get(prefix.len()) else {
            return invalid(format!(
                "prefix of length {} leaves no level to score for {kind}",
                prefix.len()
            ));
        };
        if candidates.is_empty() {
            return invalid("candidate list is empty".to_string());
        }
        let mut seen = [false; 100];
        for candidate in candidates {
            if candidate.level != expected_level {
                return invalid(format!(
                    "candidate {candidate} is not at level {expected_level}"
                ));
            }
            let slot = &mut seen[candidate.value.as_u8() as usize];
            if *slot {
                return invalid(format!("duplicate candidate {candidate}"));
            }
            *slot = true;
        }
        for (segment, &level) in prefix.iter().zip(kind.levels()) {
            if segment.level != level {
                return invalid(format!("prefix segment {segment} is out of level order"));
            }
        }
        Ok(Self {
            input,
            kind,
            prefix,
            candidates,
        })
    }

    pub fn input(&self) -> &str {
        self.input
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn prefix(&self) -> &[Segment] {
        self.prefix
    }

    pub fn candidates(&self) -> &[Segment] {
        self.candidates
    }

    /// Level being scored.
    pub fn level(&self) -> Level {
        self.candidates[0].level
    }
}

/// Unnormalized non-negative weights, one per candidate in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResponse {
    weights: Vec<f64>,
}

impl ScoreResponse {
    /// Accepts any finite, non-negative weight vector. All-zero vectors are
    /// legal; callers treat them as degenerate.
    pub fn new(weights: Vec<f64>) -> Result<Self, ScorerError> {
        for &weight in &weights {
            if !weight.is_finite() || weight < 0.0 {
                return Err(ScorerError::ProtocolError(format!(
                    "weight {weight} is not a finite non-negative number"
                )));
            }
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when no candidate received positive weight.
    pub fn is_degenerate(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }
}

/// The contract every scorer implements.
pub trait Scorer: Send + Sync {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError>;
}

/// Scores every candidate equally; useful as a baseline and protocol
/// reference.
#[derive(Debug, Default, Clone, Copy)]
pub struct UniformScorer;

impl Scorer for UniformScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        ScoreResponse::new(vec![1.0; request.candidates().len()])
    }
}

/// Looks weights up in a fixed (prefix, candidate) table; absent entries
/// weigh zero.
///
/// Rows need not be normalized: the decoder normalizes per candidate set, so
/// a row behaves as a conditional distribution whatever its scale.
#[derive(Debug, Default)]
pub struct TableScorer {
    rows: HashMap<Vec<SegmentValue>, HashMap<SegmentValue, f64>>,
}

impl TableScorer {
    pub fn from_entries<I>(entries: I) -> Result<Self, ScorerError>
    where
        I: IntoIterator<Item = (Vec<SegmentValue>, SegmentValue, f64)>,
    {
        let mut rows: HashMap<Vec<SegmentValue>, HashMap<SegmentValue, f64>> = HashMap::new();
        for (prefix, candidate, weight) in entries {
            if !weight.is_finite() || weight < 0.0 {
                return Err(ScorerError::InvalidWeight {
                    prefix: prefix.iter().map(|v| v.to_string()).collect(),
                    candidate: candidate.to_string(),
                    weight,
                });
            }
            rows.entry(prefix).or_default().insert(candidate, weight);
        }
        Ok(Self { rows })
    }
}

impl Scorer for TableScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        let prefix: Vec<SegmentValue> = request.prefix().iter().map(|s| s.value).collect();
        let row = self.rows.get(&prefix);
        let weights = request
            .candidates()
            .iter()
            .map(|candidate| {
                row.and_then(|r| r.get(&candidate.value))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect();
        ScoreResponse::new(weights)
    }
}
