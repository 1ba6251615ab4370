//! Evaluation measures: macro precision/recall/F1, exact match, per-level
//! accuracy, Cohen's kappa and kappa over monthly buckets.
//!
//! Macro scores average per-class results over the classes present in the
//! gold labels; exact match is the single-label micro view (micro P = R = F1
//! here), so both readings of an averaged score are reported. Kappa treats
//! full digit strings as categories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::taxonomy::{CodeKind, TaxCode};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no labeled pairs given")]
    EmptyInput,
    #[error("label streams differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("pairs mix HSN and SAC codes")]
    MixedKinds,
    #[error("pair {0} has no timestamp")]
    MissingTimestamps(usize),
    #[error("invalid date {0:?}: expected YYYY-MM-DD")]
    InvalidDate(String),
}

/// A calendar date, used only for monthly bucketing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Date {
    year: i32,
    month: u32,
    day: u32,
}

impl Date {
    pub fn new(year: i32, month: u32, day: u32) -> Option<Self> {
        ((1..=12).contains(&month) && (1..=31).contains(&day)).then_some(Self { year, month, day })
    }

    /// Parses an ISO-8601 calendar date, `YYYY-MM-DD`.
    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let invalid = || MetricsError::InvalidDate(text.to_string());
        let mut parts = text.splitn(3, '-');
        let year = parts.next().filter(|p| p.len() == 4);
        let month = parts.next().filter(|p| p.len() == 2);
        let day = parts.next().filter(|p| p.len() == 2);
        match (year, month, day) {
            (Some(y), Some(m), Some(d)) => {
                let year = y.parse().map_err(|_| invalid())?;
                let month = m.parse().map_err(|_| invalid())?;
                let day = d.parse().map_err(|_| invalid())?;
                Date::new(year, month, day).ok_or_else(invalid)
            }
            _ => Err(invalid()),
        }
    }

    pub fn year_month(&self) -> (i32, u32) {
        (self.year, self.month)
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// One evaluation record: a prediction against its expert label.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    predicted: TaxCode,
    gold: TaxCode,
    timestamp: Option<Date>,
}

impl LabeledPair {
    pub fn new(
        predicted: TaxCode,
        gold: TaxCode,
        timestamp: Option<Date>,
    ) -> Result<Self, MetricsError> {
        if predicted.kind() != gold.kind() {
            return Err(MetricsError::MixedKinds);
        }
        Ok(Self {
            predicted,
            gold,
            timestamp,
        })
    }

    pub fn predicted(&self) -> &TaxCode {
        &self.predicted
    }

    pub fn gold(&self) -> &TaxCode {
        &self.gold
    }

    pub fn timestamp(&self) -> Option<Date> {
        self.timestamp
    }
}

/// Macro-averaged classification scores plus exact match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationScores {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub exact_match: f64,
}

/// Per-class precision/recall/F1 over full-code classes, macro-averaged over
/// the classes present in gold. Classes never predicted score precision 0;
/// classes absent from gold score recall 0.
pub fn precision_recall_f1(pairs: &[LabeledPair]) -> Result<ClassificationScores, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    #[derive(Default)]
    struct Counts {
        gold: usize,
        predicted: usize,
        matched: usize,
    }
    let mut by_class: BTreeMap<String, Counts> = BTreeMap::new();
    let mut exact = 0usize;
    for pair in pairs {
        let gold = pair.gold.digits();
        let predicted = pair.predicted.digits();
        if gold == predicted {
            exact += 1;
            let counts = by_class.entry(gold).or_default();
            counts.gold += 1;
            counts.predicted += 1;
            counts.matched += 1;
        } else {
            by_class.entry(gold).or_default().gold += 1;
            by_class.entry(predicted).or_default().predicted += 1;
        }
    }

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut gold_classes = 0usize;
    for counts in by_class.values() {
        if counts.gold == 0 {
            continue;
        }
        gold_classes += 1;
        let precision = if counts.predicted == 0 {
            0.0
        } else {
            counts.matched as f64 / counts.predicted as f64
        };
        let recall = counts.matched as f64 / counts.gold as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }
    let n = gold_classes as f64;
    Ok(ClassificationScores {
        macro_precision: precision_sum / n,
        macro_recall: recall_sum / n,
        macro_f1: f1_sum / n,
        exact_match: exact as f64 / pairs.len() as f64,
    })
}

/// Element `i` is the fraction of pairs whose first `i + 1` segments all
/// match: prefix accuracy, monotone non-increasing, with the last element
/// equal to exact match.
pub fn per_level_accuracy(pairs: &[LabeledPair]) -> Result<Vec<f64>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let kind = single_kind(pairs)?;
    let depth = kind.depth();
    let mut matches = vec![0usize; depth];
    for pair in pairs {
        let shared = pair
            .predicted
            .segments()
            .iter()
            .zip(pair.gold.segments())
            .take_while(|(a, b)| a.value == b.value)
            .count();
        for slot in matches.iter_mut().take(shared) {
            *slot += 1;
        }
    }
    Ok(matches
        .into_iter()
        .map(|m| m as f64 / pairs.len() as f64)
        .collect())
}

/// Cohen's kappa between two equal-length label streams.
///
/// `kappa = (p_o - p_e) / (1 - p_e)` with observed agreement `p_o` and chance
/// agreement `p_e` from the raters' marginals. When both raters are constant
/// on the same category (`p_e = 1`), agreement is perfect and 1.0 is
/// returned.
pub fn cohens_kappa<L: Ord>(a: &[L], b: &[L]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let mut marginals: BTreeMap<&L, (usize, usize)> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            agree += 1;
        }
        marginals.entry(x).or_default().0 += 1;
        marginals.entry(y).or_default().1 += 1;
    }
    let observed = agree as f64 / n;
    let expected: f64 = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if expected >= 1.0 {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Kappa for one calendar month of pairs. `kappa` is `None` when the month is
/// degenerate (fewer than two distinct gold labels).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyKappa {
    /// `YYYY-MM`.
    pub month: String,
    pub kappa: Option<f64>,
    pub degenerate: bool,
}

/// Groups pairs by calendar month and computes kappa per group, months
/// ascending. Every pair must carry a timestamp.
pub fn kappa_over_time(pairs: &[LabeledPair]) -> Result<Vec<MonthlyKappa>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut groups: BTreeMap<(i32, u32), Vec<&LabeledPair>> = BTreeMap::new();
    for (index, pair) in pairs.iter().enumerate() {
        let date = pair
            .timestamp
            .ok_or(MetricsError::MissingTimestamps(index))?;
        groups.entry(date.year_month()).or_default().push(pair);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((year, month), group) in groups {
        let gold_labels: BTreeSet<String> = group.iter().map(|p| p.gold.digits()).collect();
        let month = format!("{year:04}-{month:02}");
        if gold_labels.len() < 2 {
            out.push(MonthlyKappa {
                month,
                kappa: None,
                degenerate: true,
            });
            continue;
        }
        let predicted: Vec<String> = group.iter().map(|p| p.predicted.digits()).collect();
        let gold: Vec<String> = group.iter().map(|p| p.gold.digits()).collect();
        out.push(MonthlyKappa {
            month,
            kappa: Some(cohens_kappa(&predicted, &gold)?),
            degenerate: false,
        });
    }
    Ok(out)
}

/// The full evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub exact_match: f64,
    pub per_level_accuracy: Vec<f64>,
    pub kappa: f64,
    /// Present only when every pair carries a timestamp.
    pub kappa_by_month: Option<Vec<MonthlyKappa>>,
}

/// Computes every measure over one set of pairs. Monthly kappa is included
/// exactly when all pairs are dated.
pub fn evaluate(pairs: &[LabeledPair]) -> Result<EvalReport, MetricsError> {
    let scores = precision_recall_f1(pairs)?;
    let per_level = per_level_accuracy(pairs)?;
    let predicted: Vec<String> = pairs.iter().map(|p| p.predicted.digits()).collect();
    let gold: Vec<String> = pairs.iter().map(|p| p.gold.digits()).collect();
    let kappa = cohens_kappa(&predicted, &gold)?;
    let kappa_by_month = if pairs.iter().all(|p| p.timestamp.is_some()) {
        Some(kappa_over_time(pairs)?)
    } else {
        None
    };
    Ok(EvalReport {
        macro_precision: scores.macro_precision,
        macro_recall: scores.macro_recall,
        macro_f1: scores.macro_f1,
        exact_match: scores.exact_match,
        per_level_accuracy: per_level,
        kappa,
        kappa_by_month,
    })
}

fn single_kind(pairs: &[LabeledPair]) -> Result<CodeKind, MetricsError> {
    let kind = pairs[0].gold.kind();
    if pairs.iter().any(|p| p.gold.kind() != kind) {
        return Err(MetricsError::MixedKinds);
    }
    Ok(kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hsn(digits: &str) -> TaxCode {
        TaxCode::parse(CodeKind::Hsn, digits).unwrap()
    }

    fn pair(predicted: &str, gold: &str) -> LabeledPair {
        LabeledPair::new(hsn(predicted), hsn(gold), None).unwrap()
    }

    fn dated(predicted: &str, gold: &str, date: &str) -> LabeledPair {
        LabeledPair::new(hsn(predicted), hsn(gold), Some(Date::parse(date).unwrap())).unwrap()
    }

    // The two-rater 2x2 fixture used across the crate: 100 items, 40 agree on
    // A, 30 agree on B, 15 are A/B, 15 are B/A. Direct computation:
    // p_o = 0.70, marginals 0.55/0.45 for both raters,
    // p_e = 0.55^2 + 0.45^2 = 0.505, kappa = 0.195 / 0.495 = 13/33.
    fn two_rater_fixture() -> (Vec<&'static str>, Vec<&'static str>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..40 {
            a.push("A");
            b.push("A");
        }
        for _ in 0..30 {
            a.push("B");
            b.push("B");
        }
        for _ in 0..15 {
            a.push("A");
            b.push("B");
        }
        for _ in 0..15 {
            a.push("B");
            b.push("A");
        }
        (a, b)
    }

    #[test]
    fn kappa_perfect_agreement_is_exactly_one() {
        let a = ["x", "y", "z", "x"];
        assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
        // Single shared category: p_e = 1, guard returns 1.0.
        let constant = ["c"; 10];
        assert_eq!(cohens_kappa(&constant, &constant).unwrap(), 1.0);
    }

    #[test]
    fn kappa_two_rater_fixture() {
        let (a, b) = two_rater_fixture();
        let kappa = cohens_kappa(&a, &b).unwrap();
        assert!((kappa - 13.0 / 33.0).abs() < 1e-9, "{kappa}");
    }

    #[test]
    fn kappa_disjoint_constants_is_zero() {
        let a = ["A"; 8];
        let b = ["B"; 8];
        // p_o = 0 and p_e = 0: categories never overlap across raters.
        assert_eq!(cohens_kappa(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn kappa_errors() {
        assert!(matches!(
            cohens_kappa(&["a"], &["a", "b"]),
            Err(MetricsError::LengthMismatch(1, 2))
        ));
        let empty: [&str; 0] = [];
        assert!(matches!(
            cohens_kappa(&empty, &empty),
            Err(MetricsError::EmptyInput)
        ));
    }

    #[test]
    fn kappa_invariant_under_relabeling() {
        let (a, b) = two_rater_fixture();
        let relabel = |l: &&str| if **l == *"A" { "left" } else { "right" };
        let ra: Vec<_> = a.iter().map(relabel).collect();
        let rb: Vec<_> = b.iter().map(relabel).collect();
        assert_eq!(
            cohens_kappa(&a, &b).unwrap(),
            cohens_kappa(&ra, &rb).unwrap()
        );
    }

    #[test]
    fn kappa_near_zero_for_independent_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a: Vec<u8> = (0..100_000).map(|_| rng.random_range(0..10)).collect();
        let b: Vec<u8> = (0..100_000).map(|_| rng.random_range(0..10)).collect();
        let kappa = cohens_kappa(&a, &b).unwrap();
        assert!(kappa.abs() < 0.05, "{kappa}");
    }

    #[test]
    fn prf_perfect_agreement() {
        let pairs = vec![pair("84713010", "84713010"), pair("85171200", "85171200")];
        let scores = precision_recall_f1(&pairs).unwrap();
        assert_eq!(scores.macro_precision, 1.0);
        assert_eq!(scores.macro_recall, 1.0);
        assert_eq!(scores.macro_f1, 1.0);
        assert_eq!(scores.exact_match, 1.0);
    }

    // Hand confusion matrix: gold {A x2, B x2}, predictions A,A,A,B.
    // Class A: P = 2/3, R = 1, F1 = 0.8. Class B: P = 1, R = 0.5, F1 = 2/3.
    #[test]
    fn prf_hand_confusion_matrix() {
        let a = "84713010";
        let b = "85171200";
        let pairs = vec![pair(a, a), pair(a, a), pair(a, b), pair(b, b)];
        let scores = precision_recall_f1(&pairs).unwrap();
        assert!((scores.macro_precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((scores.macro_recall - 0.75).abs() < 1e-12);
        assert!((scores.macro_f1 - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((scores.exact_match - 0.75).abs() < 1e-12);
        // Macro F1 sits between the per-class extremes.
        assert!(scores.macro_f1 > 2.0 / 3.0 && scores.macro_f1 < 0.8);
    }

    #[test]
    fn prf_disjoint_predictions() {
        let pairs = vec![pair("84713010", "85171200"), pair("84717020", "85171200")];
        let scores = precision_recall_f1(&pairs).unwrap();
        assert_eq!(scores.macro_precision, 0.0);
        assert_eq!(scores.macro_recall, 0.0);
        assert_eq!(scores.macro_f1, 0.0);
        assert_eq!(scores.exact_match, 0.0);
    }

    #[test]
    fn per_level_prefix_counting() {
        // 10 pairs: 8 share the chapter, 5 the heading, 3 the sub-heading,
        // 2 the full code.
        let gold = "84713010";
        let mut pairs = Vec::new();
        for _ in 0..2 {
            pairs.push(pair("84713010", gold));
        }
        pairs.push(pair("84713099", gold));
        for _ in 0..2 {
            pairs.push(pair("84713910", gold));
        }
        for _ in 0..3 {
            pairs.push(pair("84913010", gold));
        }
        for _ in 0..2 {
            pairs.push(pair("99713010", gold));
        }
        let accuracy = per_level_accuracy(&pairs).unwrap();
        assert_eq!(accuracy, vec![0.8, 0.5, 0.3, 0.2]);

        let scores = precision_recall_f1(&pairs).unwrap();
        assert_eq!(scores.exact_match, *accuracy.last().unwrap());
    }

    #[test]
    fn per_level_single_pair_example() {
        let pairs = vec![pair("84713010", "84713099")];
        assert_eq!(
            per_level_accuracy(&pairs).unwrap(),
            vec![1.0, 1.0, 1.0, 0.0]
        );
        let pairs = vec![pair("84713010", "84713010")];
        assert_eq!(
            per_level_accuracy(&pairs).unwrap(),
            vec![1.0, 1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn per_level_rejects_mixed_kinds() {
        let sac = TaxCode::parse(CodeKind::Sac, "998313").unwrap();
        let pairs = vec![
            pair("84713010", "84713010"),
            LabeledPair::new(sac.clone(), sac, None).unwrap(),
        ];
        assert!(matches!(
            per_level_accuracy(&pairs),
            Err(MetricsError::MixedKinds)
        ));
    }

    #[test]
    fn monthly_kappa_buckets() {
        let mut pairs = vec![
            dated("84713010", "84713010", "2024-03-02"),
            dated("85171200", "85171200", "2024-03-15"),
        ];
        // April: single constant gold label, degenerate.
        pairs.push(dated("84713010", "84713010", "2024-04-01"));
        pairs.push(dated("85171200", "84713010", "2024-04-09"));

        let monthly = kappa_over_time(&pairs).unwrap();
        assert_eq!(monthly.len(), 2);
        assert_eq!(monthly[0].month, "2024-03");
        assert_eq!(monthly[0].kappa, Some(1.0));
        assert!(!monthly[0].degenerate);
        assert_eq!(monthly[1].month, "2024-04");
        assert_eq!(monthly[1].kappa, None);
        assert!(monthly[1].degenerate);
    }

    #[test]
    fn monthly_kappa_requires_timestamps() {
        let pairs = vec![pair("84713010", "84713010")];
        assert!(matches!(
            kappa_over_time(&pairs),
            Err(MetricsError::MissingTimestamps(0))
        ));
    }

    #[test]
    fn evaluate_assembles_report() {
        let pairs = vec![
            dated("84713010", "84713010", "2024-03-02"),
            dated("85171200", "85171200", "2024-03-15"),
        ];
        let report = evaluate(&pairs).unwrap();
        assert_eq!(report.exact_match, 1.0);
        assert_eq!(report.kappa, 1.0);
        assert_eq!(report.per_level_accuracy, vec![1.0; 4]);
        assert!(report.kappa_by_month.is_some());

        let undated = vec![pair("84713010", "84713010")];
        let report = evaluate(&undated).unwrap();
        assert!(report.kappa_by_month.is_none());
    }

    #[test]
    fn date_parsing() {
        assert_eq!(Date::parse("2024-03-15").unwrap().year_month(), (2024, 3));
        assert_eq!(Date::parse("2024-03-15").unwrap().to_string(), "2024-03-15");
        for bad in [
            "2024-3-15",
            "2024-03",
            "15-03-2024",
            "2024-13-01",
            "abcd-ef-gh",
        ] {
            assert!(Date::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn labeled_pair_rejects_mixed_kinds() {
        let sac = TaxCode::parse(CodeKind::Sac, "998313").unwrap();
        assert!(matches!(
            LabeledPair::new(hsn("84713010"), sac, None),
            Err(MetricsError::MixedKinds)
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kappa_is_bounded(
                labels in proptest::collection::vec((0u8..4, 0u8..4), 1..60),
            ) {
                let (a, b): (Vec<u8>, Vec<u8>) = labels.into_iter().unzip();
                let kappa = cohens_kappa(&a, &b).unwrap();
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&kappa), "{kappa}");
            }

            // Relabeling both raters with the same bijection leaves kappa
            // unchanged.
            #[test]
            fn kappa_relabeling_invariance(
                labels in proptest::collection::vec((0u8..4, 0u8..4), 1..60),
                offset in 1u8..200,
            ) {
                let (a, b): (Vec<u8>, Vec<u8>) = labels.into_iter().unzip();
                let baseline = cohens_kappa(&a, &b).unwrap();
                let ra: Vec<u16> = a.iter().map(|&x| u16::from(x) * 7 + u16::from(offset)).collect();
                let rb: Vec<u16> = b.iter().map(|&x| u16::from(x) * 7 + u16::from(offset)).collect();
                let relabeled = cohens_kappa(&ra, &rb).unwrap();
                prop_assert!((baseline - relabeled).abs() < 1e-12);
            }
        }
    }
}
