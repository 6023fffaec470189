use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed warping spec: {0}")]
    MalformedSpec(String),
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("boundary is not totally geodesic: f'(L) = {0:e}")]
    NotTotallyGeodesic(f64),
    #[error("pole coincides with the doubling seam")]
    SeamPole,
    #[error("metric has no smooth pole at the requested end: {0}")]
    NoPole(String),
    #[error("argument outside the metric domain: {0}")]
    OutOfDomain(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("negative area {0}")]
    NegativeArea(f64),
    #[error("ODE integration failed: {0}")]
    StiffnessFailure(String),
    #[error("curvature hypotheses violated: {0}")]
    HypothesisFailure(String),
    #[error("ill-conditioned fit (condition number {0:e})")]
    IllConditionedFit(f64),
    #[error("precondition not met (profile is not the round one): {0}")]
    PreconditionNotRigid(String),
    #[error("CMC curve left the domain: {0}")]
    DomainEscape(String),
    #[error("step limit reached: {0}")]
    StepLimit(String),
    #[error("no bracket: {0}")]
    NoBracket(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
