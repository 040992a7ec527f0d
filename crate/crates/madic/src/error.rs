use thiserror::Error;

/// Errors produced by construction, analysis, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet mismatch: base {0} vs base {1}")]
    AlphabetMismatch(u64, u64),

    #[error("digit {digit} out of range for base {base}")]
    DigitOutOfRange { digit: u32, base: u64 },

    #[error("one prefix extends the other without a differing position")]
    PrefixExtends,

    #[error("invalid alpha: {0}")]
    InvalidAlpha(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid branching spec: {0}")]
    InvalidSpec(String),

    #[error("level {level} exceeds measure depth {depth}")]
    LevelBeyondDepth { level: usize, depth: usize },

    #[error("base mismatch: measure base {0}, parameter base {1}")]
    BaseMismatch(u64, u64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("measure fails validation: {0}")]
    InvalidMeasure(String),

    #[error("empty window: n0={n0} is beyond the last profile level {last}")]
    EmptyWindow { n0: usize, last: usize },

    #[error("interval {0} is not in the support")]
    NotInSupport(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
