use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::odeint::PhaseState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    /// The field is undefined where `|F_uu| < guard_floor`.
    #[error("Euler field undefined at ({x}, {u}): |F_uu| = {fuu:e} is below the guard floor {floor:e}")]
    GuardViolation { x: f64, u: f64, fuu: f64, floor: f64 },

    #[error("step size underflow at t = {t} (last valid state x = {}, u = {})", state.x, state.u)]
    StepUnderflow { t: f64, state: PhaseState },

    #[error("non-finite derivative at t = {t} (state x = {}, u = {})", state.x, state.u)]
    NonFinite { t: f64, state: PhaseState },

    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("({x}, {u}) is not an equilibrium: |rhs| = {residual:e}")]
    NotAnEquilibrium { x: f64, u: f64, residual: f64 },

    #[error("equilibrium at x = {x} is not a saddle ({kind})")]
    NotASaddle { x: f64, kind: String },

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("event not reached within t = {t_max}: {what}")]
    EventNotReached { t_max: f64, what: String },

    #[error("no saddle is reachable from the boundary data")]
    NoReachableSaddle,

    #[error("horizon T = {horizon} is shorter than T_e + T_l = {needed}")]
    HorizonTooShort { horizon: f64, needed: f64 },

    #[error("t = {t} lies outside [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error(
        "horizon T = {horizon} with growth rate {rate} exceeds the double-precision shooting bound \
         (T·rate = {}, limit {limit})", horizon * rate
    )]
    IllConditioned { horizon: f64, rate: f64, limit: f64 },

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("time domains do not overlap")]
    EmptyOverlap,
}
