use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` uses an unsupported unit, expected `{expected}`")]
    BadUnit { key: String, expected: String },
    #[error("value for `{0}` is out of range")]
    RangeViolation(String),
    #[error("cannot parse value `{value}` for `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("key `{0}` given more than once")]
    DuplicateKey(String),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("symbol time must be positive, got {0}")]
    NonPositiveSymbolTime(f64),
    #[error("channel index {k} out of range for {n} channels")]
    IndexOutOfRange { k: usize, n: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("exhaustive search over {n} channels exceeds the cap of {cap}; use random sampling")]
    CapExceeded { n: usize, cap: usize },
    #[error("histogram bin width must be positive and finite, got {0}")]
    InvalidBinWidth(f64),
    #[error("trial count must be at least 1")]
    BadTrials,
    #[error("dimension mismatch: ensemble has {ensemble} channels, frame has {frame}")]
    DimensionMismatch { ensemble: usize, frame: usize },
    #[error(
        "no reach: BER floor at zero length ({ber_at_zero:e}) already exceeds target {target:e}"
    )]
    NoRootInBracket { ber_at_zero: f64, target: f64 },
    #[error("target BER must lie in (0, 0.5), got {0}")]
    InvalidTarget(f64),
    #[error("anchor reach must be positive, got {0} km")]
    NonPositiveAnchor(f64),
    #[error("no non-negative LO linewidth reproduces the anchor with the given Tx linewidth")]
    InfeasibleFit,
}
