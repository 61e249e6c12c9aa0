use thiserror::Error;

/// Errors raised across the crate.
///
/// Constructors and operators fail loudly instead of clamping or guessing:
/// every arithmetic shortcut in the splitting calculus is backed by a proved
/// inequality, so a violated precondition here means a caller bug, not a
/// rounding artifact.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative value where a nonnegative one is required: {0}")]
    NegativeValue(String),

    #[error("zero denominator")]
    ZeroDenominator,

    #[error("cannot parse {input:?} as {what}")]
    Parse { what: &'static str, input: String },

    #[error("subtraction underflow: {a} - {b} is negative beyond the exactness guard")]
    Underflow { a: String, b: String },

    #[error("not a prefix set: {member} is a prefix of {other}")]
    NotPrefixSet { member: String, other: String },

    #[error("string length {len} does not match the required depth {depth}")]
    DepthMismatch { len: usize, depth: usize },

    #[error("enumeration index for strings longer than 62 bits would overflow")]
    EnumerationOverflow,

    #[error("conditional measure undefined: the conditioning string {w} has measure zero")]
    ZeroConditional { w: String },

    #[error("table measure queried beyond its depth {depth} at {w}; extension rule is reject")]
    BeyondTableDepth { depth: usize, w: String },

    #[error("table is missing an entry for {w}")]
    MissingTableEntry { w: String },

    #[error("operands are defined over different measures")]
    MeasureMismatch,

    #[error("{op} requires a coin-toss (product) measure")]
    NonProductMeasure { op: &'static str },

    #[error("exact evaluation unavailable: {node} evaluates only approximately")]
    InexactNode { node: String },

    #[error("robin hood input ({s}, {t}) lies outside the domain for alpha = {alpha}")]
    OutsideRobinHoodDomain { alpha: String, s: String, t: String },

    #[error("robin hood bias {alpha} must lie strictly between 0 and 1")]
    DegenerateBias { alpha: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("evidence check failed: {0}")]
    Evidence(String),

    #[error("truncation policy exhausted: the series needed {needed} terms, cap is {cap}")]
    TruncationExhausted { needed: usize, cap: usize },

    #[error("modulus violation detected during evaluation: {0}")]
    ModulusViolation(String),

    #[error("no leaf of depth {m} has value at most the initial value {initial}")]
    NoLightLeaf { m: usize, initial: String },

    #[error("diagonal trace escaped its proved bound at step {step}: {value} > {bound}")]
    TraceBoundViolated { step: usize, value: String, bound: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown name {name:?} in section {section}")]
    UnknownName { section: &'static str, name: String },

    #[error("name {name:?} participates in a reference cycle")]
    CyclicReference { name: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
