//! Special-token serialization of tax codes.
//!
//! A full code becomes one token per segment, e.g. HSN `12345678` becomes
//! `hsn_ch_12 hsn_h_34 hsn_sh_56 hsn_pt_78`; decoding trims the tags and
//! reassembles the digit string. [`emit_vocabulary`] lists every token an
//! external tokenizer must know for a given taxonomy.

use std::fmt;

use thiserror::Error;

use crate::taxonomy::{CodeKind, Level, SegmentValue, TaxCode, TaxonomyTrie};

/// Reserved separator token; emitted in the vocabulary, never decoded.
pub const DASH_TOKEN: &str = "<DASH>";
/// Reserved placeholder token; emitted in the vocabulary, never decoded.
pub const UNK_TOKEN: &str = "<UNK>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("token levels are out of order or skip a level")]
    BadLevelOrder,
    #[error("tokens mix hsn and sac prefixes")]
    MixedKind,
    #[error("unknown or reserved token {0:?} in code sequence")]
    UnknownToken(String),
    #[error("expected {expected} tokens for a complete code, found {found}")]
    WrongLength { expected: usize, found: usize },
}

/// One vocabulary token: either a `kind_level_dd` code token or a reserved
/// token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialToken {
    Code {
        kind: CodeKind,
        level: Level,
        value: SegmentValue,
    },
    Dash,
    Unknown,
}

impl SpecialToken {
    /// Parses token text such as `"hsn_ch_12"`, `"<DASH>"` or `"<UNK>"`.
    pub fn parse(text: &str) -> Result<Self, CodecError> {
        if text == DASH_TOKEN {
            return Ok(SpecialToken::Dash);
        }
        if text == UNK_TOKEN {
            return Ok(SpecialToken::Unknown);
        }
        let unknown = || CodecError::UnknownToken(text.to_string());
        let mut parts = text.split('_');
        let kind = parts
            .next()
            .and_then(|p| match p {
                "hsn" => Some(CodeKind::Hsn),
                "sac" => Some(CodeKind::Sac),
                _ => None,
            })
            .ok_or_else(unknown)?;
        let level = parts.next().and_then(Level::from_tag).ok_or_else(unknown)?;
        let value = parts
            .next()
            .and_then(SegmentValue::parse)
            .ok_or_else(unknown)?;
        if parts.next().is_some() {
            return Err(unknown());
        }
        Ok(SpecialToken::Code { kind, level, value })
    }
}

impl fmt::Display for SpecialToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecialToken::Code { kind, level, value } => {
                write!(f, "{}_{}_{}", kind.token_prefix(), level.tag(), value)
            }
            SpecialToken::Dash => f.write_str(DASH_TOKEN),
            SpecialToken::Unknown => f.write_str(UNK_TOKEN),
        }
    }
}

/// An ordered token sequence, the serialized form of a (possibly partial)
/// code. Construction does not validate; [`decode_tokens`] does.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<SpecialToken>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<SpecialToken>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[SpecialToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{token}")?;
        }
        Ok(())
    }
}

/// Serializes a full code into its token sequence, one token per segment.
pub fn encode_code(code: &TaxCode) -> TokenSequence {
    let tokens = code
        .segments()
        .iter()
        .map(|segment| SpecialToken::Code {
            kind: code.kind(),
            level: segment.level,
            value: segment.value,
        })
        .collect();
    TokenSequence::new(tokens)
}

/// Reconstructs the full code from a token sequence, validating kind
/// consistency, level order and length.
pub fn decode_tokens(sequence: &TokenSequence) -> Result<TaxCode, CodecError> {
    let mut parts = Vec::with_capacity(sequence.len());
    for token in sequence.tokens() {
        match token {
            SpecialToken::Code { kind, level, value } => parts.push((*kind, *level, *value)),
            reserved => return Err(CodecError::UnknownToken(reserved.to_string())),
        }
    }
    let (kind, _, _) = *parts.first().ok_or(CodecError::WrongLength {
        expected: CodeKind::Sac.depth(),
        found: 0,
    })?;
    if parts.iter().any(|&(k, _, _)| k != kind) {
        return Err(CodecError::MixedKind);
    }
    let levels = kind.levels();
    for (i, &(_, level, _)) in parts.iter().enumerate() {
        match levels.get(i) {
            Some(&expected) if expected == level => {}
            _ => return Err(CodecError::BadLevelOrder),
        }
    }
    if parts.len() != kind.depth() {
        return Err(CodecError::WrongLength {
            expected: kind.depth(),
            found: parts.len(),
        });
    }
    let values = parts.iter().map(|&(_, _, value)| value).collect();
    Ok(TaxCode::new(kind, values).expect("depth and order already checked"))
}

/// Every token an external tokenizer needs for `trie`: one per (level, value)
/// pair occurring anywhere in the taxonomy, sorted by token text, followed by
/// the two reserved tokens.
pub fn emit_vocabulary(trie: &TaxonomyTrie) -> Vec<SpecialToken> {
    let kind = trie.kind();
    let mut tokens: Vec<SpecialToken> = trie
        .values_by_level()
        .into_iter()
        .zip(kind.levels())
        .flat_map(|(values, &level)| {
            values
                .into_iter()
                .map(move |value| SpecialToken::Code { kind, level, value })
        })
        .collect();
    tokens.sort_by_key(|t| t.to_string());
    tokens.push(SpecialToken::Dash);
    tokens.push(SpecialToken::Unknown);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> TaxonomyTrie {
        TaxonomyTrie::from_codes(CodeKind::Hsn, ["84713010", "84717020", "85171200"]).unwrap()
    }

    fn rendered(tokens: &[SpecialToken]) -> Vec<String> {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn encode_hsn_decomposition() {
        let code = TaxCode::parse(CodeKind::Hsn, "12345678").unwrap();
        let sequence = encode_code(&code);
        assert_eq!(
            rendered(sequence.tokens()),
            vec!["hsn_ch_12", "hsn_h_34", "hsn_sh_56", "hsn_pt_78"]
        );
    }

    #[test]
    fn encode_sac_decomposition() {
        let code = TaxCode::parse(CodeKind::Sac, "998313").unwrap();
        let sequence = encode_code(&code);
        assert_eq!(
            rendered(sequence.tokens()),
            vec!["sac_ch_99", "sac_h_83", "sac_sh_13"]
        );
    }

    #[test]
    fn round_trip_all_fixture_leaves() {
        for code in fixture().leaves() {
            assert_eq!(decode_tokens(&encode_code(&code)).unwrap(), code);
        }
    }

    #[test]
    fn decode_published_sequence() {
        let tokens = ["hsn_ch_12", "hsn_h_34", "hsn_sh_56", "hsn_pt_78"]
            .iter()
            .map(|t| SpecialToken::parse(t).unwrap())
            .collect();
        let code = decode_tokens(&TokenSequence::new(tokens)).unwrap();
        assert_eq!(code, TaxCode::parse(CodeKind::Hsn, "12345678").unwrap());
    }

    #[test]
    fn decode_rejects_level_gap() {
        let tokens = ["hsn_ch_12", "hsn_sh_56", "hsn_pt_78"]
            .iter()
            .map(|t| SpecialToken::parse(t).unwrap())
            .collect();
        assert_eq!(
            decode_tokens(&TokenSequence::new(tokens)),
            Err(CodecError::BadLevelOrder)
        );
    }

    #[test]
    fn decode_rejects_mixed_kind() {
        let tokens = ["hsn_ch_12", "sac_h_34", "hsn_sh_56", "hsn_pt_78"]
            .iter()
            .map(|t| SpecialToken::parse(t).unwrap())
            .collect();
        assert_eq!(
            decode_tokens(&TokenSequence::new(tokens)),
            Err(CodecError::MixedKind)
        );
    }

    #[test]
    fn decode_rejects_reserved_and_short_sequences() {
        let tokens = vec![
            SpecialToken::parse("hsn_ch_12").unwrap(),
            SpecialToken::Dash,
        ];
        assert_eq!(
            decode_tokens(&TokenSequence::new(tokens)),
            Err(CodecError::UnknownToken(DASH_TOKEN.to_string()))
        );

        let tokens = ["hsn_ch_12", "hsn_h_34", "hsn_sh_56"]
            .iter()
            .map(|t| SpecialToken::parse(t).unwrap())
            .collect();
        assert_eq!(
            decode_tokens(&TokenSequence::new(tokens)),
            Err(CodecError::WrongLength {
                expected: 4,
                found: 3
            })
        );

        assert_eq!(
            decode_tokens(&TokenSequence::new(Vec::new())),
            Err(CodecError::WrongLength {
                expected: 3,
                found: 0
            })
        );
    }

    #[test]
    fn token_parse_rejects_malformed_text() {
        for bad in [
            "hsn_ch_1",
            "hsn_xx_12",
            "ncm_ch_12",
            "hsn_ch_12_9",
            "hsnch12",
            "",
        ] {
            assert!(matches!(
                SpecialToken::parse(bad),
                Err(CodecError::UnknownToken(_))
            ));
        }
    }

    // Fixture vocabulary enumerated by hand: distinct (level, value) pairs of
    // {84713010, 84717020, 85171200} sorted by token text, reserved last.
    #[test]
    fn vocabulary_fixture_exact() {
        let vocab = emit_vocabulary(&fixture());
        assert_eq!(
            rendered(&vocab),
            vec![
                "hsn_ch_84",
                "hsn_ch_85",
                "hsn_h_17",
                "hsn_h_71",
                "hsn_pt_00",
                "hsn_pt_10",
                "hsn_pt_20",
                "hsn_sh_12",
                "hsn_sh_30",
                "hsn_sh_70",
                "<DASH>",
                "<UNK>",
            ]
        );
    }

    #[test]
    fn vocabulary_single_leaf() {
        let trie = TaxonomyTrie::from_codes(CodeKind::Hsn, ["84713010"]).unwrap();
        let vocab = emit_vocabulary(&trie);
        assert_eq!(vocab.len(), 6);
        assert_eq!(vocab[4], SpecialToken::Dash);
        assert_eq!(vocab[5], SpecialToken::Unknown);
    }

    #[test]
    fn vocabulary_sac_uses_sac_prefix_and_three_levels() {
        let trie = TaxonomyTrie::from_codes(CodeKind::Sac, ["995411", "998313"]).unwrap();
        let vocab = emit_vocabulary(&trie);
        assert_eq!(
            rendered(&vocab),
            vec![
                "sac_ch_99",
                "sac_h_54",
                "sac_h_83",
                "sac_sh_11",
                "sac_sh_13",
                "<DASH>",
                "<UNK>",
            ]
        );
    }

    // A product-tariff token is not a legal SAC level, so the extra token is
    // a level-order violation rather than a length problem.
    #[test]
    fn decode_rejects_sac_sequence_with_extra_level() {
        let tokens = ["sac_ch_99", "sac_h_83", "sac_sh_13", "sac_pt_01"]
            .iter()
            .map(|t| SpecialToken::parse(t).unwrap())
            .collect();
        assert_eq!(
            decode_tokens(&TokenSequence::new(tokens)),
            Err(CodecError::BadLevelOrder)
        );
    }

    fn digit_code_strategy(kind: CodeKind) -> impl Strategy<Value = String> {
        proptest::collection::vec(0u8..100, kind.depth())
            .prop_map(|values| values.iter().map(|v| format!("{v:02}")).collect())
    }

    proptest! {
        #[test]
        fn prop_round_trip_and_vocabulary_reparse(
            codes in proptest::collection::btree_set(digit_code_strategy(CodeKind::Hsn), 1..30)
        ) {
            let trie = TaxonomyTrie::from_codes(CodeKind::Hsn, codes.iter()).unwrap();
            for code in trie.leaves() {
                prop_assert_eq!(decode_tokens(&encode_code(&code)).unwrap(), code);
            }
            let vocab = emit_vocabulary(&trie);
            prop_assert!(vocab.len() <= 4 * 100 + 2);
            let mut seen = std::collections::BTreeSet::new();
            for token in &vocab {
                prop_assert_eq!(SpecialToken::parse(&token.to_string()).unwrap(), *token);
                prop_assert!(seen.insert(token.to_string()), "duplicate token");
            }
        }

        // Distinct codes always serialize to distinct sequences.
        #[test]
        fn prop_encode_injective(
            a in digit_code_strategy(CodeKind::Sac),
            b in digit_code_strategy(CodeKind::Sac),
        ) {
            let code_a = TaxCode::parse(CodeKind::Sac, &a).unwrap();
            let code_b = TaxCode::parse(CodeKind::Sac, &b).unwrap();
            prop_assert_eq!(encode_code(&code_a) == encode_code(&code_b), a == b);
        }
    }
}
