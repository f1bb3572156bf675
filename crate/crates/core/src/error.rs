use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The network document is not well-formed.
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    /// The network document is well-formed but describes an invalid network.
    #[error("invalid network: {0}")]
    Validation(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },

    #[error("variable `{0}` is assigned more than once")]
    DuplicateAssignment(String),

    #[error("query variable `{0}` is part of the evidence")]
    QueryInEvidence(String),

    #[error("variable `{0}` is not binary")]
    NotBinary(String),

    #[error("parent instantiation for `{variable}` is incomplete or names a non-parent: {detail}")]
    BadParentInstantiation { variable: String, detail: String },

    #[error("parameter {0} is not tunable (its value is 0 or 1)")]
    NonTunable(String),

    #[error("value {value} is outside {expected}")]
    OutOfRange { value: f64, expected: &'static str },

    #[error("the evidence has probability zero")]
    ZeroEvidence,

    #[error("state space of {0} complete worlds exceeds the enumeration limit")]
    StateSpaceTooLarge(u128),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    /// Errors from the constraint and evidence mini-languages; `position` is a
    /// zero-based byte offset into the input.
    #[error("parse error at position {position}: {message}")]
    Grammar { position: usize, message: String },
}
