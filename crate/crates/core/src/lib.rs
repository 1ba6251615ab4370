//! Mapping free-form product and service descriptions to hierarchical tax
//! codes (HSN/SAC).
//!
//! The pipeline: clean a raw description ([`textprep`]), constrain generation
//! to a taxonomy prefix trie ([`taxonomy`]), run hierarchical constrained
//! beam search over a pluggable conditional-probability scorer ([`decoder`],
//! [`scorer`]), serialize codes to and from their special-token form
//! ([`codec`]), and evaluate predictions against expert labels ([`metrics`]).

pub mod codec;
pub mod decoder;
pub mod metrics;
pub mod scorer;
pub mod taxonomy;
pub mod textprep;

pub use decoder::{beam_search, predict, BeamConfig, Prediction};
pub use taxonomy::{CodeKind, Level, Segment, SegmentValue, TaxCode, TaxonomyTrie};
