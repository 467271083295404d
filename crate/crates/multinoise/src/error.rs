use thiserror::Error;

/// Errors produced across the crate.
///
/// Domain violations (a state outside the admissible ball, data outside the
/// noise support) are distinguished from hard failures: optimizers and
/// samplers treat the former as an infinite potential and carry on, while the
/// latter abort the run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state lies outside the admissible ball: |u| = {norm} > {radius}")]
    OutsideAdmissibleBall { norm: f64, radius: f64 },

    #[error("data outside noise support: component {index} has ratio {value}")]
    SupportViolation { index: usize, value: f64 },

    #[error("forward output must be positive: component {index} = {value}")]
    NonPositiveForward { index: usize, value: f64 },

    #[error("forward output is not finite at component {index}")]
    NonFiniteForward { index: usize },

    #[error("state-dependent covariance overflowed at entry ({row},{col})")]
    CovarianceOverflow { row: usize, col: usize },

    #[error("covariance is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("singular linear system in {0}")]
    SingularSystem(String),

    #[error("marginal likelihood integral underflowed for component {index}")]
    QuadratureUnderflow { index: usize },

    #[error("chain stuck: potential infinite at {0} consecutive proposals")]
    StuckChain(usize),

    #[error("unreliable estimate: effective sample size {ess:.1} < {min}")]
    LowEffectiveSampleSize { ess: f64, min: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// True for violations of the potential's domain (state or data outside
    /// the region where the likelihood is defined). Optimization and
    /// sampling map these to an infinite potential instead of failing.
    pub fn is_domain_violation(&self) -> bool {
        matches!(
            self,
            Error::OutsideAdmissibleBall { .. }
                | Error::SupportViolation { .. }
                | Error::NonPositiveForward { .. }
                | Error::NonFiniteForward { .. }
                | Error::CovarianceOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
