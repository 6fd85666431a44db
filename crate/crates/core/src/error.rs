use thiserror::Error;

use crate::exprdsl::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("band not scalar")]
    BandNotScalar,

    #[error("invalid volatility band: {0}")]
    InvalidBand(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("CFL violation: dt = {dt} exceeds the maximal admissible dt = {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("blow-up: non-finite value at time level {step}")]
    BlowUp { step: usize },

    #[error("trajectory blow-up at step {step}")]
    TrajectoryBlowUp { step: usize },

    #[error("unsupported nesting depth {0} (at most 2 marginals)")]
    UnsupportedNesting(usize),

    #[error("control outside the volatility band: {0}")]
    OutsideBand(String),

    #[error("scenario path has no state trajectory X; integrate the G-SDE first")]
    MissingState,

    #[error("sigma is singular at t = {t}, x = {x:?}")]
    SingularSigma { t: f64, x: Vec<f64> },

    #[error("not reducible: alpha = 0 cannot be rescaled to alpha = 1")]
    NotReducible,

    #[error("sigma vanishes at grid point x = {x}")]
    SigmaVanishes { x: f64 },

    #[error("query x = {x} outside the profile grid [{lo}, {hi}]")]
    OutsideProfile { x: f64, lo: f64, hi: f64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}
