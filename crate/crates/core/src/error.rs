use thiserror::Error;

use crate::deviation::Regime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidOffspring(String),

    #[error("invalid step law: {0}")]
    InvalidStep(String),

    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("tilt parameter {t} lies outside the domain of the log-MGF")]
    TiltOutsideDomain { t: f64 },

    #[error("rate-function classification inconclusive: {0}")]
    ClassificationInconclusive(String),

    #[error("degenerate model: {0}")]
    DegenerateSpec(String),

    #[error("operation requires regime {expected}, model is {found}")]
    RegimeMismatch { expected: String, found: Regime },

    #[error("root of {function} is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NoBracket {
        function: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("population cap exceeded: {population:.3e} > {cap:.3e}")]
    PopulationCapExceeded { population: f64, cap: f64 },

    #[error("step law is not supported on a lattice")]
    NonLatticeStep,

    #[error("empty level set at generation {n}")]
    EmptyLevelSet { n: usize },

    #[error("strategy horizon t_n = {horizon} is too short at n = {n}")]
    ScheduleTooShort { n: usize, horizon: i64 },

    #[error("schedule invariant violated: {0}")]
    ScheduleInvariant(String),
}
