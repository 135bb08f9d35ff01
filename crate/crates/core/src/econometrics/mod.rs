//! Probit maximum likelihood, the two-stage selection estimator with inverse
//! Mills ratio correction, and marginal effects at means.

pub mod heckman;
pub mod margins;
pub mod mills;
pub mod probit;
pub mod report;

pub use heckman::{fit_heckman, HeckmanFit};
pub use margins::{marginal_effects, MarginalEffect, Stage};
pub use mills::inverse_mills;
pub use probit::{fit_probit, ProbitFit};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EconError {
    #[error("perfect separation suspected: coefficient for {0:?} diverged")]
    PerfectSeparation(String),
    #[error("singular Hessian; collinear columns: {0}")]
    SingularHessian(String),
    #[error("design matrix has {rows} rows but {cols} columns; need rows > cols")]
    TooFewRows { rows: usize, cols: usize },
    #[error("outcome equation must exclude at least one selection column (exclusion restriction)")]
    NoExclusionRestriction,
    #[error("only {selected} selected rows for {params} outcome parameters")]
    TooFewSelected { selected: usize, params: usize },
    #[error("response vector must contain both classes")]
    DegenerateResponse,
    #[error("feature {0:?} is not a model column")]
    UnknownFeature(String),
}
