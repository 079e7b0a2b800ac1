//! Exact and rigorously bracketed computations at small scale.
//!
//! [`fixed_point`] brackets the non-visit probability on a finite box.
//! [`enumerate`] walks every small tree with every step assignment in exact
//! rational arithmetic and checks the path factorization and the conditional
//! visit bounds.

pub mod enumerate;
pub mod fixed_point;
pub mod series;

pub use enumerate::{
    enumerate_depth, enumerate_small, lemma1_check, EnumerationReport, FactorizationCheck, LemmaReport,
    PathStatistics,
};
pub use fixed_point::{solve_nonvisit, solve_with_pgf, OracleField};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("target has dimension {found}, step law has dimension {expected}")]
    TargetDimension { expected: usize, found: usize },
    #[error("target lies outside the box")]
    TargetOutsideBox,
    #[error("fixed point not converged after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("laws must have exact rational weights for enumeration")]
    NotExact,
    #[error("violation on path {path:?}: {detail}")]
    ViolationFound { path: Vec<Vec<i64>>, detail: String },
}
