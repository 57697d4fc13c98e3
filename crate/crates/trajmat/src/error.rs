use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the subsystem that raises
/// them; most carry enough context to be actionable from a CLI message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("lift config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("unknown environment tag `{0}`")]
    UnknownEnv(String),

    #[error("unknown action {action} (environment has {count} actions)")]
    UnknownAction { action: usize, count: usize },

    #[error("invalid environment parameter: {0}")]
    InvalidEnvParam(String),

    #[error("observation chain broken at transition {index} (gap {gap:.3e})")]
    BrokenChain { index: usize, gap: f64 },

    #[error("index set invalid: {0}")]
    InvalidIndexSet(String),

    #[error("interval cover invalid: {0}")]
    InvalidCover(String),

    #[error("gauge transform singular: |det| = {0:.3e} below floor")]
    SingularGauge(f64),

    #[error("operation requires the full Kronecker lift, got compact mode")]
    CompactModeUnsupported,

    #[error("channel {0} not present in this lift mode")]
    InvalidChannel(&'static str),

    #[error("matrix not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),

    #[error("empty input for {0}")]
    EmptyInput(&'static str),

    #[error("enumeration horizon {requested} above cap {cap}")]
    HorizonCapExceeded { requested: usize, cap: usize },

    #[error(
        "candidate horizon {candidate} incompatible with reachable set at T={expected}: \
         non-realizable by horizon accounting"
    )]
    HorizonMismatch { candidate: f64, expected: usize },

    #[error("proxy dataset degenerate: {0}")]
    DegenerateDataset(String),

    #[error("feature spec mismatch between source and target models: {0}")]
    FeatureSpecMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("motif is not reversal-paired: {0}")]
    NotReversalPaired(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("file format version mismatch: expected `{expected}`, got `{got}`")]
    VersionMismatch { expected: String, got: String },

    #[error("missing key `{0}` in config")]
    MissingKey(String),

    #[error("missing prerequisite artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
