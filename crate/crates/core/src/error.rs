use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("frame is rank deficient (singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value from evaluator at {0}")]
    Evaluator(String),

    #[error("step size {step:.3e} underflows at t = {t}")]
    StepUnderflow { step: f64, t: f64 },

    #[error("energy drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    EnergyDrift { drift: f64, tol: f64 },

    #[error("newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NewtonFailure { iterations: usize, residual: f64, iterate: Vec<f64> },

    #[error("fiber hessian is not positive definite at the current iterate")]
    NotConvex,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("tracked frame degenerated beyond recovery at t = {t}")]
    FrameDegenerate { t: f64 },

    #[error("subspace is not a graph over the horizontal (vertical angle {angle:.3e})")]
    NotAGraph { angle: f64 },

    #[error("kernel dimension {found} where {expected} was required (grid index {index})")]
    KernelDimension { expected: usize, found: usize, index: usize },

    #[error("characteristic field is not orientable: sign conflict at grid index {index}")]
    NonOrientable { index: usize },

    #[error("ill-conditioned pullback (condition {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("parameter refinement diverged (residual {residual:.3e})")]
    RefinementDiverged { residual: f64 },

    #[error("immersion fails at grid index {index}")]
    ImmersionFailure { index: usize },

    #[error("no return to the start point within horizon {horizon}")]
    NoReturn { horizon: f64 },

    #[error("image of the characteristic field is not collinear (residual {residual:.3e})")]
    NonCollinear { residual: f64 },

    #[error("orbit does not close after unit time (defect {defect:.3e})")]
    NonPeriodic { defect: f64 },

    #[error("winding number ambiguous at this resolution (increment {increment:.3})")]
    WindingAmbiguous { increment: f64 },

    #[error("quadrature order {order} below minimum {min}")]
    QuadratureOrder { order: usize, min: usize },

    #[error("base map too far from identity (sup |Df - I| = {distance:.3e} > {bound:.3e})")]
    NonContraction { distance: f64, bound: f64 },

    #[error("closeness bound {bound:.3e} unreachable with {n_max} factors")]
    FactorBoundUnreachable { bound: f64, n_max: usize },

    #[error("integer overflow after {steps} iterations, before a decision was reached")]
    Overflow { steps: usize },

    #[error("matrix is not in SL(2,Z): det = {det}")]
    NotUnimodular { det: i128 },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("unknown base map `{0}`")]
    UnknownBaseMap(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
