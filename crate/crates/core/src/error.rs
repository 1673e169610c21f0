use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("precision exhausted at {bits} bits: {context}")]
    PrecisionExhausted { bits: u32, context: String },

    #[error("integer relation: v = {v:?}, p = {p} (v·θ + p = 0)")]
    IntegerRelation { v: Vec<i64>, p: String },

    #[error("suspected integer relation: v = {v:?}, p = {p} (undecidable at {bits} bits)")]
    SuspectedRelation { v: Vec<i64>, p: String, bits: u32 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("construction violation: {0}")]
    ConstructionViolation(String),

    #[error("height overflow: {0}")]
    HeightOverflow(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("box not in tree: {0}")]
    NotInTree(String),
}
