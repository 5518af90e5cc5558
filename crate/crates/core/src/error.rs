use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite amplitude at sample {sample}, trace {trace}")]
    NonFiniteAmplitude { sample: usize, trace: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label length {got} does not match {expected} traces")]
    LabelLength { expected: usize, got: usize },

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate trace {0}: every sample is zero")]
    DegenerateTrace(usize),

    #[error("uncalibratable component: {0}")]
    Uncalibratable(String),

    #[error("no studs detected at any threshold fraction")]
    NoStudsDetected,

    #[error("time {t_ns} ns is beyond stack (maximum traversal time {max_ns} ns)")]
    BeyondStack { t_ns: f64, max_ns: f64 },

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("{n} features exceed the exact enumeration bound of {max}; use sampled_shapley")]
    TooManyFeatures { n: usize, max: usize },

    #[error("infeasible stratification: {0}")]
    InfeasibleSplit(String),

    #[error("missing sidecar {0}")]
    MissingSidecar(PathBuf),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs or configuration rather than by a
    /// failure while computing. The CLI maps these to exit code 1.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Diverged { .. } | Error::NoStudsDetected | Error::Uncalibratable(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
