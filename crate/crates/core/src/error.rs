use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input does not describe an admissible problem.
    Validation,
    /// The input is admissible but the numerics could not deliver a verdict.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("{which} is not Hermitian at x = {x} (deviation {deviation:.3e})")]
    NotHermitian {
        which: &'static str,
        x: f64,
        deviation: f64,
    },

    #[error("symmetric part is not strictly positive: minimum eigenvalue {min_eigenvalue:.6e} at x = {x}")]
    NotStrictlyPositive { x: f64, min_eigenvalue: f64 },

    #[error("{which} has a nonzero imaginary part at x = {x} in a real-field spec")]
    NotReal { which: &'static str, x: f64 },

    #[error("{which} is not finite at x = {x}")]
    Unbounded { which: &'static str, x: f64 },

    #[error("A(x) is singular at the unflagged point x = {x} (|det A| = {det:.3e})")]
    DegenerateOutsideFlags { x: f64, det: f64 },

    #[error("invalid degeneracy declaration: {0}")]
    InvalidDegeneracy(String),

    #[error("invalid boundary-condition subspace: {0}")]
    InvalidSubspace(String),

    #[error("step size underflow at x = {x} (h = {h:.3e})")]
    StepSizeUnderflow { x: f64, h: f64 },

    #[error("A(x) is not invertible at x = {x}")]
    SingularA { x: f64 },

    #[error("trajectories live on different intervals")]
    IntervalMismatch,

    #[error("trace space does not split into the kernel traces: rank {rank}, expected {expected}")]
    DecompositionDefect { rank: usize, expected: usize },

    #[error("classifying map is not well defined: V meets ker T1 in dimension {intersection}")]
    WellDefinedness { intersection: usize },

    #[error("internal inconsistency for `{flag}`: subspace route says {subspace}, operator route says {operator}")]
    InternalInconsistency {
        flag: &'static str,
        subspace: bool,
        operator: bool,
    },

    #[error("{quantity}: primary value {primary:.12e} and independent check {secondary:.12e} disagree")]
    CrossCheck {
        quantity: &'static str,
        primary: f64,
        secondary: f64,
    },

    #[error("operation requires a scalar (n = 1) spec, got n = {0}")]
    NotScalar(usize),

    #[error("square-integrability of block {block} ({direction}) is undecidable after {levels} dyadic levels")]
    UndecidableIntegrability {
        block: usize,
        direction: &'static str,
        levels: usize,
    },

    #[error("realisation is not bijective")]
    NotBijective,

    #[error("trace system is ill conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("realisation does not have a signed boundary map")]
    PreconditionNotSigned,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::StepSizeUnderflow { .. }
            | Error::SingularA { .. }
            | Error::DecompositionDefect { .. }
            | Error::InternalInconsistency { .. }
            | Error::CrossCheck { .. }
            | Error::UndecidableIntegrability { .. }
            | Error::IllConditioned { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}
