//! Structured attribute codes: schema, canonical string grammar, and the
//! weighted wildcard-aware distance between two codes.
//!
//! A code string is eight colon-separated segments in slot order
//! (`sex:age:tusks:right-prominent:right-secondary:left-prominent:left-secondary:extreme`),
//! with `*` as the wildcard, e.g. `F:AD:T2:U:U:N1:U:X0`.

mod code;
mod distance;
mod schema;

pub use code::{format_code, parse_code, SeekAttribute, SeekCode, SlotValue, WILDCARD};
pub use distance::{
    attribute_agreement, seek_distance, slot_difference, Normalization, SeekWeights,
    SlotAgreement,
};
pub use schema::{SeekSchema, Slot, SlotAlphabet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeekError {
    #[error("malformed code: {0}")]
    MalformedCode(String),
    #[error("unknown symbol {symbol:?} in slot {slot}")]
    UnknownSymbol { slot: Slot, symbol: String },
    #[error("codes come from different schema versions ({left} vs {right})")]
    SchemaMismatch { left: u32, right: u32 },
    #[error("no codes given")]
    EmptyInput,
    #[error("agreement needs at least two codes per group, got {0}")]
    GroupTooSmall(usize),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(&'static str),
}
