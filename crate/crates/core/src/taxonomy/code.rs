//! Code kinds, hierarchy levels, two-digit segments and validated tax codes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::TaxonomyError;

/// The two code families handled by the engine.
///
/// HSN codes classify physical goods and are eight digits long; SAC codes
/// classify services and are six digits long. Both decompose into ordered
/// two-digit segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CodeKind {
    Hsn,
    Sac,
}

impl CodeKind {
    /// Hierarchy levels for this kind, in canonical order.
    pub fn levels(self) -> &'static [Level] {
        match self {
            CodeKind::Hsn => &[
                Level::Chapter,
                Level::Heading,
                Level::SubHeading,
                Level::ProductTariff,
            ],
            CodeKind::Sac => &[Level::Chapter, Level::Heading, Level::SubHeading],
        }
    }

    /// Number of two-digit segments in a full code (4 for HSN, 3 for SAC).
    pub fn depth(self) -> usize {
        self.levels().len()
    }

    /// Number of decimal digits in a full code (8 for HSN, 6 for SAC).
    pub fn digit_count(self) -> usize {
        self.depth() * 2
    }

    /// Lowercase prefix used in special tokens (`hsn` or `sac`).
    pub fn token_prefix(self) -> &'static str {
        match self {
            CodeKind::Hsn => "hsn",
            CodeKind::Sac => "sac",
        }
    }

    /// Case-insensitive parse of `"hsn"` / `"sac"`.
    pub fn parse(text: &str) -> Option<Self> {
        if text.eq_ignore_ascii_case("hsn") {
            Some(CodeKind::Hsn)
        } else if text.eq_ignore_ascii_case("sac") {
            Some(CodeKind::Sac)
        } else {
            None
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeKind::Hsn => f.write_str("HSN"),
            CodeKind::Sac => f.write_str("SAC"),
        }
    }
}

/// A position in the code hierarchy, from broadest to most specific.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Chapter,
    Heading,
    SubHeading,
    ProductTariff,
}

impl Level {
    /// Short tag used in special tokens (`ch`, `h`, `sh`, `pt`).
    pub fn tag(self) -> &'static str {
        match self {
            Level::Chapter => "ch",
            Level::Heading => "h",
            Level::SubHeading => "sh",
            Level::ProductTariff => "pt",
        }
    }

    /// Human-readable name (`chapter`, `heading`, `sub-heading`, `product-tariff`).
    pub fn name(self) -> &'static str {
        match self {
            Level::Chapter => "chapter",
            Level::Heading => "heading",
            Level::SubHeading => "sub-heading",
            Level::ProductTariff => "product-tariff",
        }
    }

    /// Inverse of [`Level::tag`].
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "ch" => Some(Level::Chapter),
            "h" => Some(Level::Heading),
            "sh" => Some(Level::SubHeading),
            "pt" => Some(Level::ProductTariff),
            _ => None,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A two-digit segment value, `00` through `99`.
///
/// Ordering matches digit-string ordering, which makes it the tie-break key
/// everywhere determinism is required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentValue(u8);

impl SegmentValue {
    pub fn new(value: u8) -> Option<Self> {
        (value <= 99).then_some(Self(value))
    }

    /// Parses exactly two ASCII decimal digits.
    pub fn parse(text: &str) -> Option<Self> {
        let bytes = text.as_bytes();
        if bytes.len() != 2 || !bytes.iter().all(u8::is_ascii_digit) {
            return None;
        }
        Some(Self((bytes[0] - b'0') * 10 + (bytes[1] - b'0')))
    }

    pub fn as_u8(self) -> u8 {
        self.0
    }
}

impl fmt::Display for SegmentValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}", self.0)
    }
}

/// One level-tagged segment of a code path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub level: Level,
    pub value: SegmentValue,
}

impl Segment {
    pub fn new(level: Level, value: SegmentValue) -> Self {
        Self { level, value }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.level.tag(), self.value)
    }
}

/// A validated full tax code: a kind plus one segment per hierarchy level,
/// in canonical level order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaxCode {
    kind: CodeKind,
    segments: Vec<Segment>,
}

impl TaxCode {
    /// Builds a code from segment values; levels are assigned positionally.
    pub fn new(kind: CodeKind, values: Vec<SegmentValue>) -> Result<Self, TaxonomyError> {
        if values.len() != kind.depth() {
            return Err(TaxonomyError::InvalidCode {
                kind,
                code: values.iter().map(|v| v.to_string()).collect(),
                message: format!("expected {} segments, got {}", kind.depth(), values.len()),
            });
        }
        let segments = kind
            .levels()
            .iter()
            .zip(values)
            .map(|(&level, value)| Segment::new(level, value))
            .collect();
        Ok(Self { kind, segments })
    }

    /// Parses a digit string (`"84713010"` for HSN, `"998313"` for SAC).
    pub fn parse(kind: CodeKind, digits: &str) -> Result<Self, TaxonomyError> {
        let invalid = |message: String| TaxonomyError::InvalidCode {
            kind,
            code: digits.to_string(),
            message,
        };
        if digits.len() != kind.digit_count() {
            return Err(invalid(format!(
                "expected {} digits, got {}",
                kind.digit_count(),
                digits.len()
            )));
        }
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid("contains a non-digit character".to_string()));
        }
        let values = digits
            .as_bytes()
            .chunks(2)
            .map(|pair| {
                SegmentValue::new((pair[0] - b'0') * 10 + (pair[1] - b'0')).expect("two digits")
            })
            .collect();
        Self::new(kind, values)
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segment values in order, without level tags.
    pub fn values(&self) -> impl Iterator<Item = SegmentValue> + '_ {
        self.segments.iter().map(|s| s.value)
    }

    /// The full digit string, e.g. `"84713010"`.
    pub fn digits(&self) -> String {
        self.segments.iter().map(|s| s.value.to_string()).collect()
    }
}

impl fmt::Display for TaxCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for segment in &self.segments {
            write!(f, "{}", segment.value)?;
        }
        Ok(())
    }
}
