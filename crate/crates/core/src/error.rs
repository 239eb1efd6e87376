use alloc::string::String;

use crate::expr::ExprError;

/// Everything that can go wrong above the expression layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    /// `unembed` of a point on (or numerically at) the horizon.
    #[error("point lies on the horizon (p2c = {p2c}); its preimage is at infinity")]
    Infinity { p2c: f64 },

    #[error("point is not an equilibrium on the horizon: {0}")]
    NotEquilibrium(String),

    /// C* vanishes (or nearly so); the root/equilibrium bijection is undefined.
    #[error("degenerate equilibrium: C* = {c_star:e}")]
    DegenerateEquilibrium { c_star: f64 },

    /// A closed-form eigenvector formula hit a vanishing denominator.
    #[error("formula degenerate: {what} (denominator {denominator:e})")]
    FormulaDegenerate { what: &'static str, denominator: f64 },

    #[error("internal consistency check `{what}` failed: residual {residual:e}")]
    Consistency { what: &'static str, residual: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("trajectory did not converge to a horizon equilibrium")]
    NotConverged,

    #[error("insufficient data: {0}")]
    Insufficient(String),
}

pub type Result<T> = core::result::Result<T, Error>;
