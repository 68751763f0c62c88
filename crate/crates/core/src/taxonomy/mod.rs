//! Manipulation codes and the motion lexicon.

mod code;
mod lexicon;

pub use code::{
    code_distance, enumerate_legal_codes, CodeDistanceWeights, CodeError, Engagement,
    InvalidWeights, MotionCode, Validation, Violation, Warning,
};
pub use lexicon::{
    consolidate, normalize_label, strip_qualifiers, Consolidation, EntrySource, LexiconEntry,
    LexiconError, LexiconVariant, MotionLexicon, TABLE_SEED_JSON, TABLE_SEED_VERSION,
};
