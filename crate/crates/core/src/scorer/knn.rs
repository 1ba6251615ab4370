//! Similarity-weighted nearest-neighbour scorer.
//!
//! A desk-scale stand-in for a fine-tuned model: the k training descriptions
//! closest to the input vote for the next segment their own codes take after
//! the request prefix.

use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError};
use crate::taxonomy::{CodeKind, TaxCode};
use crate::textprep::similarity;

/// Scorer built by [`fit_similarity_scorer`].
#[derive(Debug)]
pub struct SimilarityScorer {
    examples: Vec<(String, TaxCode)>,
    kind: CodeKind,
    k_neighbors: usize,
}

/// Fits a nearest-neighbour scorer over `(description, code)` examples.
///
/// All codes must share one kind; `k_neighbors` selects how many closest
/// descriptions vote per request. Neighbours tied with the k-th similarity
/// all contribute, keeping scoring fully deterministic.
pub fn fit_similarity_scorer(
    examples: Vec<(String, TaxCode)>,
    k_neighbors: usize,
) -> Result<SimilarityScorer, ScorerError> {
    if examples.is_empty() {
        return Err(ScorerError::EmptyTrainingSet);
    }
    if k_neighbors == 0 {
        return Err(ScorerError::InvalidRequest(
            "k_neighbors must be at least 1".to_string(),
        ));
    }
    let kind = examples[0].1.kind();
    if examples.iter().any(|(_, code)| code.kind() != kind) {
        return Err(ScorerError::MixedKinds);
    }
    Ok(SimilarityScorer {
        examples,
        kind,
        k_neighbors,
    })
}

impl Scorer for SimilarityScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        if request.kind() != self.kind {
            return Err(ScorerError::InvalidRequest(format!(
                "request kind {} does not match training kind {}",
                request.kind(),
                self.kind
            )));
        }

        let similarities: Vec<f64> = self
            .examples
            .iter()
            .map(|(description, _)| similarity(request.input(), description))
            .collect();

        // Everything at or above the k-th largest similarity contributes.
        let mut sorted = similarities.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let cutoff = sorted[self.k_neighbors.min(sorted.len()) - 1];

        let prefix_len = request.prefix().len();
        let mut weights = vec![0.0; request.candidates().len()];
        let mut any_extends = false;
        for ((_, code), &sim) in self.examples.iter().zip(&similarities) {
            if sim < cutoff {
                continue;
            }
            let extends = code
                .segments()
                .iter()
                .zip(request.prefix())
                .all(|(a, b)| a.value == b.value);
            if !extends {
                continue;
            }
            any_extends = true;
            let next = code.segments()[prefix_len].value;
            for (weight, candidate) in weights.iter_mut().zip(request.candidates()) {
                if candidate.value == next {
                    *weight += sim;
                }
            }
        }

        if !any_extends {
            return ScoreResponse::new(vec![1.0; request.candidates().len()]);
        }
        ScoreResponse::new(weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::tests::seg;
    use crate::taxonomy::Level;

    fn hsn(digits: &str) -> TaxCode {
        TaxCode::parse(CodeKind::Hsn, digits).unwrap()
    }

    #[test]
    fn single_exact_neighbor_dominates() {
        let scorer =
            fit_similarity_scorer(vec![("red apple".to_string(), hsn("08081000"))], 1).unwrap();
        let candidates = [seg(Level::Chapter, 8), seg(Level::Chapter, 84)];
        let request = ScoreRequest::new("red apple", CodeKind::Hsn, &[], &candidates).unwrap();
        let response = scorer.score(&request).unwrap();
        assert_eq!(response.weights(), &[1.0, 0.0]);
    }

    #[test]
    fn unmatched_prefix_falls_back_to_uniform() {
        let scorer =
            fit_similarity_scorer(vec![("red apple".to_string(), hsn("08081000"))], 1).unwrap();
        let prefix = [seg(Level::Chapter, 84)];
        let candidates = [seg(Level::Heading, 71), seg(Level::Heading, 17)];
        let request = ScoreRequest::new("red apple", CodeKind::Hsn, &prefix, &candidates).unwrap();
        let response = scorer.score(&request).unwrap();
        assert_eq!(response.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn equally_similar_neighbors_both_contribute() {
        // Two training items equally similar to the query split their votes,
        // even with k_neighbors = 1.
        let scorer = fit_similarity_scorer(
            vec![
                ("green apple".to_string(), hsn("08081000")),
                ("green apple".to_string(), hsn("08082000")),
            ],
            1,
        )
        .unwrap();
        let prefix = [seg(Level::Chapter, 8), seg(Level::Heading, 8)];
        let candidates = [seg(Level::SubHeading, 10), seg(Level::SubHeading, 20)];
        let request =
            ScoreRequest::new("green apple", CodeKind::Hsn, &prefix, &candidates).unwrap();
        let response = scorer.score(&request).unwrap();
        assert_eq!(response.weights()[0], response.weights()[1]);
        assert!(response.weights()[0] > 0.0);
    }

    #[test]
    fn fit_validation() {
        assert!(matches!(
            fit_similarity_scorer(Vec::new(), 1),
            Err(ScorerError::EmptyTrainingSet)
        ));
        let mixed = vec![
            ("a".to_string(), hsn("08081000")),
            (
                "b".to_string(),
                TaxCode::parse(CodeKind::Sac, "998313").unwrap(),
            ),
        ];
        assert!(matches!(
            fit_similarity_scorer(mixed, 1),
            Err(ScorerError::MixedKinds)
        ));
        assert!(matches!(
            fit_similarity_scorer(vec![("a".to_string(), hsn("08081000"))], 0),
            Err(ScorerError::InvalidRequest(_))
        ));
    }

    // With k covering the whole training set and a query equal to a unique
    // training description, that description's code path gets strictly
    // maximal weight at every level. Training codes sit on distinct chapters
    // so no candidate pools similarity from several neighbors.
    #[test]
    fn exact_unique_query_dominates_every_level() {
        let training = vec![
            ("portable laptop computer".to_string(), hsn("84713010")),
            ("external storage drive".to_string(), hsn("90017020")),
            ("mobile cellular phone".to_string(), hsn("85171200")),
            ("office swivel chair".to_string(), hsn("94013000")),
        ];
        let scorer = fit_similarity_scorer(training.clone(), training.len()).unwrap();
        let (query, target) = &training[2];

        let mut prefix: Vec<crate::taxonomy::Segment> = Vec::new();
        for segment in target.segments() {
            // Candidate sets include the target's next value plus decoys
            // drawn from the other codes at the same position.
            let mut candidates = vec![*segment];
            for (_, code) in &training {
                let decoy = code.segments()[prefix.len()];
                if !candidates.iter().any(|c| c.value == decoy.value) {
                    candidates.push(decoy);
                }
            }
            let request = ScoreRequest::new(query, CodeKind::Hsn, &prefix, &candidates).unwrap();
            let response = scorer.score(&request).unwrap();
            let target_weight = response.weights()[0];
            for (weight, candidate) in response.weights().iter().zip(&candidates).skip(1) {
                assert!(
                    target_weight > *weight,
                    "level {}: {} ({target_weight}) vs {} ({weight})",
                    prefix.len(),
                    segment.value,
                    candidate.value
                );
            }
            prefix.push(*segment);
        }
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let scorer = fit_similarity_scorer(vec![("a".to_string(), hsn("08081000"))], 1).unwrap();
        let candidates = [seg(Level::Chapter, 99)];
        let request = ScoreRequest::new("a", CodeKind::Sac, &[], &candidates).unwrap();
        assert!(matches!(
            scorer.score(&request),
            Err(ScorerError::InvalidRequest(_))
        ));
    }
}
