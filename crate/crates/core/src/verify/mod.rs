//! Independent numerical checks of the closed forms: ODE integration of the
//! systems behind the Heston and Vasicek limits, and path simulation of all
//! five wealth processes.

pub mod mc;
pub mod ode;

use thiserror::Error;

use crate::growth::GrowthError;

pub use mc::{
    mc_growth_estimate, mc_laplace_three_halves, LaplaceEstimate, McConfig, SimEstimate,
    DEFAULT_SEED,
};
pub use ode::{
    heston_lambda_from_trace, integrate_heston_riccati, integrate_vasicek_ode,
    vasicek_lambda_from_trace, OdeTrace,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("step at t = {t} moved B by {delta_b} from {b}, more than half its distance to the limit {b_limit}; reduce dt")]
    StepSizeTooLarge {
        t: f64,
        b: f64,
        delta_b: f64,
        b_limit: f64,
    },
    #[error("B moved the wrong way (by {delta_b} from {b}) at t = {t}")]
    SignStructure { t: f64, b: f64, delta_b: f64 },
    #[error("all simulated paths are identical")]
    DegenerateVariance,
    #[error("path {path} (seed {seed}) produced a non-finite value")]
    NonFinitePath { path: usize, seed: u64 },
    #[error("{n_steps} steps over t = {t} is too coarse; need at least {required}")]
    InsufficientSteps {
        n_steps: usize,
        t: f64,
        required: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Growth(#[from] GrowthError),
}
