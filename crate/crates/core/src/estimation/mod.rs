//! Estimators for beliefs, ecological drift and volatility, CRRA curvature,
//! and the nonparametric growth/adherence relation.

mod beliefs;
mod gbm;
mod gmm;
mod local_linear;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use beliefs::fit_beliefs;
pub use gbm::{fit_gbm, gbm_mle_numeric, GbmControl, GbmOptions};
pub use gmm::{fit_gamma, gamma_criterion_profile, FixedParams, GammaOptions, MomentSet};
pub use local_linear::{local_linear_fit, LocalLinearFit, LocalLinearOptions};

/// Point estimates with standard errors and free-form numeric diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub estimates: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, f64>,
    pub n_obs: usize,
    pub converged: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimationResult {
    pub fn new(n_obs: usize) -> Self {
        EstimationResult {
            estimates: BTreeMap::new(),
            std_errors: BTreeMap::new(),
            n_obs,
            converged: false,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn estimate(&mut self, name: &str, value: f64, se: f64) {
        self.estimates.insert(name.to_string(), value);
        self.std_errors.insert(name.to_string(), se);
    }

    pub fn diag(&mut self, name: impl Into<String>, value: f64) {
        self.diagnostics.insert(name.into(), value);
    }
}
