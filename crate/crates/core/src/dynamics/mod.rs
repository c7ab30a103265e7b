//! Forest-cover simulation and transition densities.

mod counterfactual;
mod density;
mod simulate;

pub use counterfactual::{
    counterfactual_panel, counterfactual_with, CounterfactualReport, CounterfactualRow,
};
pub use density::{
    ln_norm_cdf, lognormal_tpd, reflected_tpd, stationary_cdf, stationary_density, DensitySpec,
};
pub use simulate::{
    median_cover_path, simulate_endpoints, simulate_path, simulate_path_with, simulate_reflected,
    Scheme, Trajectory,
};
