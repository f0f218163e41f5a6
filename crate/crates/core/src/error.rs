use thiserror::Error;

/// Errors shared by every analysis stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ball B({center:?}, {radius}) carries no mass")]
    EmptyBall { center: Vec<f64>, radius: f64 },

    #[error("restriction masses differ from 1 beyond tolerance (mu: {mu}, nu: {nu})")]
    MassMismatch { mu: f64, nu: f64 },

    #[error("combined support of {size} points exceeds the dual-oracle cap {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("scale {scale} is below 4x the resolution floor {floor}")]
    ResolutionTooFine { scale: f64, floor: f64 },

    #[error("plane does not meet the unit ball (distance {dist})")]
    PlaneMissesBall { dist: f64 },

    #[error("scale constraint violated: {msg}")]
    ScaleConstraintViolated { msg: String },

    #[error("cube tree has no cubes in the requested band")]
    EmptyTree,

    #[error("region domain contains no grid points")]
    DegenerateRegion,

    #[error("big-piece config cannot meet the mass target: achievable removed fraction {achievable}, target {target}")]
    ConfigInfeasible { achievable: f64, target: f64 },

    #[error("point {point:?} is not within {tol} of the support")]
    NotInSupport { point: Vec<f64>, tol: f64 },

    #[error("invalid measure at index {index}: {msg}")]
    InvalidMeasure { index: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
