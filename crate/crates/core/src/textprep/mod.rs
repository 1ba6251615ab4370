//! Deterministic cleaning and enrichment of raw product/service descriptions.
//!
//! Cleaning runs a fixed stage order: variant normalization (lowercasing,
//! whitespace collapse, phrase standardization, suffix lemmatization), then
//! whitespace tokenization, noise stripping, brand masking and adjacent
//! repeat removal. Descriptions left without enough informative tokens are
//! rejected as data, not as errors.

mod similarity;

pub use similarity::{indel_distance, similarity};

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

/// Replacement emitted for masked brand tokens.
pub const BRAND_MASK: &str = "<brand>";

/// Default noise patterns: serial/batch style tokens mixing letters with a
/// multi-digit run, all-punctuation tokens, and bare digit runs of five or
/// more.
pub const DEFAULT_NOISE_PATTERNS: &[&str] = &[
    "[[:alpha:]].*[0-9]{2}|[0-9]{2}.*[[:alpha:]]",
    "^[[:punct:]]+$",
    "^[0-9]{5,}$",
];

#[derive(Debug, Error)]
pub enum TextPrepError {
    #[error("invalid noise pattern {pattern:?}: {source}")]
    InvalidPattern {
        pattern: String,
        source: regex::Error,
    },
    #[error("variant {0:?} appears more than once in the variant map")]
    DuplicateVariant(String),
    #[error("variant list for {0:?} is empty")]
    EmptyVariantList(String),
    #[error("min_informative_tokens must be at least 1")]
    InvalidMinTokens,
    #[error("cannot enrich a rejected description")]
    RejectedInput,
    #[error("invalid config or catalog: {0}")]
    Config(String),
}

/// Why a description was rejected during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectionReason {
    /// Fewer informative (non-brand) tokens than the configured minimum.
    Incomplete,
    /// No tokens survived cleaning.
    Empty,
}

impl RejectionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectionReason::Incomplete => "incomplete",
            RejectionReason::Empty => "empty",
        }
    }
}

/// A cleaned description: normalized text plus a rejection verdict.
///
/// The text is always lowercase, single-space separated and trimmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanedText {
    text: String,
    rejection: Option<RejectionReason>,
}

impl CleanedText {
    /// Wraps pre-normalized text as accepted input; lowercases and collapses
    /// whitespace so the type invariant holds.
    pub fn accepted(text: impl AsRef<str>) -> Self {
        let text = text
            .as_ref()
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        Self {
            text,
            rejection: None,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn rejected(&self) -> bool {
        self.rejection.is_some()
    }

    pub fn rejection_reason(&self) -> Option<RejectionReason> {
        self.rejection
    }
}

/// A catalog row used for enrichment: a standardized description plus
/// category tags.
#[derive(Debug, Clone, Deserialize)]
pub struct CatalogEntry {
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// Reads a catalog file: a JSON array of `{"description", "tags"}` objects.
pub fn load_catalog<R: Read>(reader: R) -> Result<Vec<CatalogEntry>, TextPrepError> {
    let entries: Vec<CatalogEntry> =
        serde_json::from_reader(reader).map_err(|e| TextPrepError::Config(e.to_string()))?;
    for (index, entry) in entries.iter().enumerate() {
        if entry.description.trim().is_empty() {
            return Err(TextPrepError::Config(format!(
                "catalog entry {index} has an empty description"
            )));
        }
    }
    Ok(entries)
}

#[derive(Debug, Deserialize)]
struct RawCleanConfig {
    #[serde(default)]
    noise_patterns: Option<Vec<String>>,
    #[serde(default)]
    variant_map: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    brands: Vec<String>,
    #[serde(default = "default_min_tokens")]
    min_informative_tokens: usize,
}

fn default_min_tokens() -> usize {
    1
}

/// Compiled cleaning configuration.
#[derive(Debug)]
pub struct CleanConfig {
    noise: Vec<Regex>,
    /// (variant phrase, canonical form), longest phrase first.
    variants: Vec<(String, String)>,
    brands: HashSet<String>,
    min_informative_tokens: usize,
}

impl CleanConfig {
    pub fn new(
        noise_patterns: &[String],
        variant_map: &BTreeMap<String, Vec<String>>,
        brands: &[String],
        min_informative_tokens: usize,
    ) -> Result<Self, TextPrepError> {
        if min_informative_tokens == 0 {
            return Err(TextPrepError::InvalidMinTokens);
        }
        let noise = noise_patterns
            .iter()
            .map(|pattern| {
                Regex::new(pattern).map_err(|source| TextPrepError::InvalidPattern {
                    pattern: pattern.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut seen = HashSet::new();
        let mut variants = Vec::new();
        for (canonical, phrases) in variant_map {
            if phrases.is_empty() {
                return Err(TextPrepError::EmptyVariantList(canonical.clone()));
            }
            let canonical = canonical.to_lowercase();
            for phrase in phrases {
                let phrase = phrase.to_lowercase();
                if !seen.insert(phrase.clone()) {
                    return Err(TextPrepError::DuplicateVariant(phrase));
                }
                variants.push((phrase, canonical.clone()));
            }
        }
        // Longest phrase first so multi-word variants win over their parts;
        // lexicographic among equal lengths keeps replacement deterministic.
        variants.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        Ok(Self {
            noise,
            variants,
            brands: brands.iter().map(|b| b.to_lowercase()).collect(),
            min_informative_tokens,
        })
    }

    /// Reads a JSON config with keys `noise_patterns`, `variant_map`,
    /// `brands` and `min_informative_tokens`; absent keys fall back to the
    /// defaults.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, TextPrepError> {
        let raw: RawCleanConfig =
            serde_json::from_reader(reader).map_err(|e| TextPrepError::Config(e.to_string()))?;
        let noise = raw.noise_patterns.unwrap_or_else(default_noise_patterns);
        Self::new(
            &noise,
            &raw.variant_map,
            &raw.brands,
            raw.min_informative_tokens,
        )
    }

    pub fn min_informative_tokens(&self) -> usize {
        self.min_informative_tokens
    }
}

fn default_noise_patterns() -> Vec<String> {
    DEFAULT_NOISE_PATTERNS
        .iter()
        .map(|p| p.to_string())
        .collect()
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self::new(&default_noise_patterns(), &BTreeMap::new(), &[], 1)
            .expect("default config is valid")
    }
}

/// Removes the second copy of any immediately adjacent repeated token
/// subsequence, longest repeat first, left to right, iterated to fixpoint.
pub fn dedup_repeats<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    let mut out: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < out.len() {
            let max_len = (out.len() - i) / 2;
            let mut removed = false;
            for len in (1..=max_len).rev() {
                if out[i..i + len] == out[i + len..i + 2 * len] {
                    out.drain(i + len..i + 2 * len);
                    removed = true;
                    changed = true;
                    break;
                }
            }
            if !removed {
                i += 1;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Drops every token matching any configured noise pattern.
pub fn strip_noise<S: AsRef<str>>(tokens: &[S], config: &CleanConfig) -> Vec<String> {
    tokens
        .iter()
        .map(|t| t.as_ref())
        .filter(|token| !config.noise.iter().any(|re| re.is_match(token)))
        .map(str::to_string)
        .collect()
}

/// Replaces tokens matching the brand set (case-insensitively) with
/// [`BRAND_MASK`].
pub fn mask_brands<S: AsRef<str>>(tokens: &[S], config: &CleanConfig) -> Vec<String> {
    tokens
        .iter()
        .map(|t| t.as_ref())
        .map(|token| {
            if config.brands.contains(&token.to_lowercase()) {
                BRAND_MASK.to_string()
            } else {
                token.to_string()
            }
        })
        .collect()
}

/// Lowercases, collapses whitespace, rewrites variant phrases to their
/// canonical form (longest variant first) and applies suffix lemmatization.
pub fn normalize_variants(text: &str, config: &CleanConfig) -> String {
    let mut text = text
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    for (phrase, canonical) in &config.variants {
        text = replace_phrase(&text, phrase, canonical);
    }
    text.split_whitespace()
        .map(lemmatize)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replaces whole-token-bounded occurrences of `phrase` in space-normalized
/// `text`. Matches never start or end inside a token.
fn replace_phrase(text: &str, phrase: &str, replacement: &str) -> String {
    if phrase.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(offset) = rest.find(phrase) {
        let before_ok = offset == 0 || rest.as_bytes()[offset - 1] == b' ';
        let end = offset + phrase.len();
        let after_ok = end == rest.len() || rest.as_bytes()[end] == b' ';
        if before_ok && after_ok {
            out.push_str(&rest[..offset]);
            out.push_str(replacement);
            rest = &rest[end..];
        } else {
            // Skip past this occurrence without replacing it.
            let skip = offset + phrase.chars().next().map_or(1, char::len_utf8);
            out.push_str(&rest[..skip]);
            rest = &rest[skip..];
        }
    }
    out.push_str(rest);
    out
}

/// Conservative suffix stripping: peels `-ing`, `-es`, `-ed`, `-s` while the
/// remaining stem keeps at least four characters, stopping at the first
/// suffix whose stem would be too short.
fn lemmatize(token: &str) -> String {
    const SUFFIXES: [&str; 4] = ["ing", "es", "ed", "s"];
    let mut current = token;
    'strip: loop {
        for suffix in SUFFIXES {
            if let Some(stem) = current.strip_suffix(suffix) {
                if stem.chars().count() >= 4 {
                    current = stem;
                    continue 'strip;
                }
                break 'strip;
            }
        }
        break;
    }
    current.to_string()
}

/// Runs the full cleaning pipeline and decides acceptance.
///
/// Stage order: variant normalization, whitespace tokenization, noise
/// stripping, brand masking, repeat removal. The result is rejected as
/// `Empty` when no tokens survive, or `Incomplete` when fewer than
/// `min_informative_tokens` non-brand tokens remain.
pub fn clean(description: &str, config: &CleanConfig) -> CleanedText {
    let normalized = normalize_variants(description, config);
    let tokens: Vec<String> = normalized.split_whitespace().map(str::to_string).collect();
    let tokens = strip_noise(&tokens, config);
    let tokens = mask_brands(&tokens, config);
    let tokens = dedup_repeats(&tokens);

    let rejection = if tokens.is_empty() {
        Some(RejectionReason::Empty)
    } else {
        let informative = tokens.iter().filter(|t| *t != BRAND_MASK).count();
        (informative < config.min_informative_tokens).then_some(RejectionReason::Incomplete)
    };
    CleanedText {
        text: tokens.join(" "),
        rejection,
    }
}

/// Appends the closest catalog entry's description and tags (token-level
/// deduplicated) when its similarity reaches `threshold`; otherwise returns
/// the input unchanged. Ties are broken by catalog order.
pub fn enrich(
    cleaned: &CleanedText,
    catalog: &[CatalogEntry],
    threshold: f64,
) -> Result<CleanedText, TextPrepError> {
    if cleaned.rejected() {
        return Err(TextPrepError::RejectedInput);
    }
    let mut best: Option<(&CatalogEntry, f64)> = None;
    for entry in catalog {
        let score = similarity(cleaned.text(), &entry.description);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((entry, score));
        }
    }
    let Some((entry, score)) = best else {
        return Ok(cleaned.clone());
    };
    if score < threshold {
        return Ok(cleaned.clone());
    }

    let mut tokens: Vec<String> = cleaned
        .text()
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let mut present: HashSet<String> = tokens.iter().cloned().collect();
    let additions = entry
        .description
        .split_whitespace()
        .chain(entry.tags.iter().flat_map(|tag| tag.split_whitespace()));
    for token in additions {
        let token = token.to_lowercase();
        if present.insert(token.clone()) {
            tokens.push(token);
        }
    }
    Ok(CleanedText {
        text: tokens.join(" "),
        rejection: None,
    })
}
