//! Stationary and finite-horizon mean-field equilibria and their comparative statics.

mod finite_horizon;
mod statics;
mod stationary;

pub use finite_horizon::{
    q_mfe_finite_horizon, time_grid, Bequest, FiniteHorizonOptions, FiniteHorizonSolution,
};
pub use statics::{
    classify_sustainability, fosd_dominates, fosd_response, FosdResponse, Sustainability,
};
pub use stationary::{q_mfe_stationary, q_no_interaction, q_pro, EquilibriumSolution};
