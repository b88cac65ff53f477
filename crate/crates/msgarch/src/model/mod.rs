//! Panel MS-GARCH model objects and exact likelihood computations shared by
//! the simulator and the sampler.

mod likelihood;
mod types;

pub use likelihood::{
    approx_variance_path, complete_loglik, complete_loglik_with_init, enumerate_loglik,
    garch_variance_path,
};
pub use types::{
    CommonTransitionMean, HiddenPath, Hyperparameters, InitialStateDist, ModelError, Panel,
    RegimeParams, Sigma0Policy, TransitionMatrix,
};
