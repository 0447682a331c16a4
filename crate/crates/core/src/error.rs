use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error at s = {s}: {reason}")]
    Domain { s: Complex64, reason: &'static str },

    #[error("singular update: {0}")]
    Singular(&'static str),

    #[error("order {mu} has no rational form p/q with q <= {max_den} within {tol:e}")]
    IrrationalOrder { mu: f64, tol: f64, max_den: u32 },

    #[error("polynomial degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("root finder did not converge (best residual {best_residual:e})")]
    RootFinding { best_residual: f64 },

    #[error("simulation diverged at step {step} (t = {time} s)")]
    Diverged { step: usize, time: f64 },

    #[error("trajectory has {0} samples, at least 3 are required")]
    ShortTrajectory(usize),

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("configuration is unstable (stability margin {margin:.6} rad)")]
    Unstable { margin: f64, report: Box<crate::stability::StabilityReport> },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
