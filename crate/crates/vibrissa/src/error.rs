use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("contact point too close to the whisker root (|c| < 1e-6 mm)")]
    DegenerateContact,
    #[error("contact unresolvable: shaft penetrates the object even at maximum curvature")]
    Unresolvable,
    #[error("calibration region contains no reachable grid nodes")]
    EmptyGrid,
    #[error("least-squares system is rank deficient")]
    RankDeficient,
    #[error("point ({x:.3}, {y:.3}) outside the model domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("gradient vanished after {steps} trace steps at ({x:.3}, {y:.3})")]
    GradientVanished { steps: usize, x: f64, y: f64 },
    #[error("trace left the model domain after {steps} steps at ({x:.3}, {y:.3})")]
    LeftDomain { steps: usize, x: f64, y: f64 },
    #[error("trace failed to reach the target arc length within the step budget")]
    NotConverged,
    #[error("measurement {z:.1} uT outside the characterized range [{min:.1}, {max:.1}]")]
    OutOfRange { z: f64, min: f64, max: f64 },
    #[error("filter used before initialization")]
    FilterUninitialized,
    #[error("non-positive measurement variance: {0}")]
    NonPositiveVariance(f64),
    #[error("spline fit is degenerate: {0}")]
    SplineDegenerate(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
