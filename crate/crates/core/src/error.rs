use std::fmt;

use thiserror::Error;

/// Why an expression could not be evaluated at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNegative,
    /// Negative base with a non-integer exponent, or zero to a negative power.
    PowDomain,
    /// The operation overflowed or produced a non-finite value.
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::LogNonPositive => "log of non-positive value",
            DomainKind::SqrtNegative => "sqrt of negative value",
            DomainKind::PowDomain => "power outside its real domain",
            DomainKind::NonFinite => "non-finite result",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },

    #[error("domain error at byte {offset}: {kind}")]
    Domain { kind: DomainKind, offset: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is off the constraint manifold: max |phi| = {residual:e} > {tolerance:e}")]
    OffConstraint { residual: f64, tolerance: f64 },

    #[error("multiplier matrix C is singular or rank-deficient (rank {rank}, {rows}x{cols})")]
    SingularC { rank: usize, rows: usize, cols: usize },

    #[error("matrix G is singular or not square (rank {rank}, {rows}x{cols})")]
    SingularG { rank: usize, rows: usize, cols: usize },

    #[error("vector does not lie in the direct sum of the force and tangent bundles (residual {residual:e})")]
    NotInSplit { residual: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("metric is not positive definite at the queried point")]
    NotPositiveDefinite,

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("projection onto the constraint manifold did not converge (residual {residual:e})")]
    ProjectionFailed { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
