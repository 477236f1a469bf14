use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("differential has rank {rank} < {expected} at point {point}")]
    NotImmersion {
        point: usize,
        rank: usize,
        expected: usize,
    },

    #[error("frame alignment failed at point {point} (residual {residual:.3e})")]
    FrameAlignmentFailure { point: usize, residual: f64 },

    #[error("metrics are not proportional at point {point} (residual {residual:.3e})")]
    NotConformal { point: usize, residual: f64 },

    #[error("<g, e0> = {value:.3e} is not positive at point {point}")]
    OnExceptionalRay { point: usize, value: f64 },

    #[error("image does not lie in the light cone (residual {residual:.3e})")]
    NotInLightCone { residual: f64 },

    #[error("distribution is not conformally ruled (residual {residual:.3e})")]
    NotConformallyRuled { residual: f64 },

    #[error("subspace is degenerate (radical of dimension {radical_dim})")]
    DegenerateSubspace { radical_dim: usize },

    #[error("hypothesis out of range: {0}")]
    HypothesisOutOfRange(String),

    #[error("induced metrics differ (residual {residual:.3e})")]
    NotIsometricPair { residual: f64 },

    #[error("splitting failed: {0}")]
    SplitFailure(String),

    #[error("rank of {what} jumped from {expected} to {found}")]
    RankJump {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("claim {claim} violated (residual {residual:.3e})")]
    ClaimViolation { claim: u8, residual: f64 },

    #[error("no sign change of <F, F> found along any grid line")]
    NoIntersection,

    #[error("slice is not transversal to the light cone at point {point} (|grad| = {gradient:.3e})")]
    NotTransversal { point: usize, gradient: f64 },

    #[error("extension is not an immersion at any tried radius (last {radius:.3e})")]
    NotImmersionAtRadius { radius: f64 },

    #[error("manifest error at {field}: {message}")]
    Manifest { field: String, message: String },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
