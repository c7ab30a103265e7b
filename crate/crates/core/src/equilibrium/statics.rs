use serde::{Deserialize, Serialize};

use super::stationary::{q_mfe_stationary, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::model::{BeliefPrior, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sustainability {
    SustainableForAll,
    UnsustainableForAll,
    SwitchesAt(f64),
}

/// Compares the tabulated policy with `mu - sigma^2/2`.
pub fn classify_sustainability(sol: &EquilibriumSolution) -> Sustainability {
    let above = sol.q_rate.iter().filter(|&&q| q > sol.threshold).count();
    match (above, sol.crossing) {
        (_, Some(a)) => Sustainability::SwitchesAt(a),
        (0, None) => Sustainability::SustainableForAll,
        _ => Sustainability::UnsustainableForAll,
    }
}

/// True if `high` first-order stochastically dominates `low` on a 1001-point grid.
pub fn fosd_dominates(high: &BeliefPrior, low: &BeliefPrior) -> bool {
    (1..1000).all(|i| {
        let a = i as f64 / 1000.0;
        high.cdf(a) <= low.cdf(a) + 1e-12
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FosdResponse {
    pub grid: Vec<f64>,
    pub delta_q: Vec<f64>,
    pub delta_q_tilde: f64,
}

/// Policy change from shifting the prior upwards in the FOSD order.
pub fn fosd_response(
    params: &ModelParams,
    prior_low: &BeliefPrior,
    prior_high: &BeliefPrior,
    grid: &[f64],
) -> Result<FosdResponse> {
    if !fosd_dominates(prior_high, prior_low) {
        return Err(Error::Precondition(format!(
            "Beta({}, {}) does not dominate Beta({}, {}) in the first order",
            prior_high.alpha, prior_high.beta, prior_low.alpha, prior_low.beta
        )));
    }
    let lo = q_mfe_stationary(params, prior_low, grid)?;
    let hi = q_mfe_stationary(params, prior_high, grid)?;
    Ok(FosdResponse {
        grid: grid.to_vec(),
        delta_q: hi.q_rate.iter().zip(&lo.q_rate).map(|(h, l)| h - l).collect(),
        delta_q_tilde: hi.q_tilde_star - lo.q_tilde_star,
    })
}
