//! Parameter optimizers: limited-memory quasi-Newton with finite-difference
//! gradients, rotosolve coordinate sweeps, and SPSA.

mod lbfgs;
mod rotosolve;
mod spsa;

pub use lbfgs::{central_gradient, quasi_newton_minimize, LbfgsConfig, LbfgsResult};
pub use rotosolve::{rotosolve_fit, rotosolve_minimize, sweep_grid, RotosolveConfig, RotosolveResult, SinusoidFit};
pub use spsa::{spsa_minimize, Spsa, SpsaConfig, SpsaResult};

use crate::{Error, Result};

pub(crate) fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} returned {value}")))
    }
}
