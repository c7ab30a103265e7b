use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{elasticities, BeliefPrior, G1Form, G2Form, ModelParams};
use crate::quadrature::try_belief_moment;

/// Stationary extraction rate without the median-forest coupling.
pub fn q_no_interaction(a: f64, params: &ModelParams) -> Result<f64> {
    let e = elasticities(a, params)?;
    let s2 = 0.5 * params.sigma * params.sigma;
    Ok(e.eps_q * (params.rho - params.mu * e.nu_q - s2 * e.nu_q / e.eps_q))
}

/// Affine dependence of the stationary rate on the median rate:
/// `q(a) = base(a) + slope(a) * (q_tilde - threshold)`.
pub(crate) fn affine_coefficients(a: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let e = elasticities(a, params)?;
    Ok((q_no_interaction(a, params)?, e.eps_q * e.nu_xbar))
}

/// Compact closed form for `g1 = 1`, `g2 = a^k`.
///
/// The median rate solves `q = q0 + (1-gamma)/gamma * m_k * (q - s)` with
/// `s = mu - sigma^2/2` and `m_k = E[a^k]` taken in closed form.
pub fn q_pro(a: f64, params: &ModelParams, prior: &BeliefPrior) -> Result<f64> {
    let k = match (params.g1_form, params.g2_form) {
        (G1Form::Unit, G2Form::PowA { k2 }) => k2,
        _ => {
            return Err(Error::Precondition(
                "q_pro requires g1_form = Unit and g2_form = PowA".into(),
            ))
        }
    };
    let g = params.gamma;
    let s = params.threshold();
    let m_k = prior.raw_moment(k);
    let q0 = q_no_interaction(0.0, params)?;
    let denom = g - (1.0 - g) * m_k;
    if denom.abs() <= 1e-14 * g {
        return Err(Error::IllPosed(format!(
            "gamma - (1-gamma) E[a^k] = {denom:e} for gamma = {g}, E[a^k] = {m_k}"
        )));
    }
    let q_tilde = (g * q0 - s * (1.0 - g) * m_k) / denom;
    let nu_x = crate::model::g2(a, params)? * (1.0 - g);
    Ok(q0 + nu_x / g * (q_tilde - s))
}

/// Stationary mean-field equilibrium tabulated on an adherence grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub params: ModelParams,
    pub prior: BeliefPrior,
    pub q_tilde_star: f64,
    pub grid: Vec<f64>,
    pub q_rate: Vec<f64>,
    pub threshold: f64,
    pub crossing: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl EquilibriumSolution {
    /// Exact policy at any adherence.
    pub fn rate_at(&self, a: f64) -> Result<f64> {
        let (base, slope) = affine_coefficients(a, &self.params)?;
        Ok(base + slope * (self.q_tilde_star - self.threshold))
    }

    /// Linear interpolation of the tabulated policy.
    pub fn interpolate(&self, a: f64) -> Result<f64> {
        let g = &self.grid;
        if g.is_empty() || a < g[0] || a > g[g.len() - 1] {
            return Err(Error::Domain {
                what: "adherence",
                value: a,
                expected: "within the tabulated grid",
            });
        }
        let i = g.partition_point(|&x| x <= a).clamp(1, g.len().max(2) - 1);
        if g.len() == 1 {
            return Ok(self.q_rate[0]);
        }
        let (x0, x1) = (g[i - 1], g[i]);
        let t = if x1 > x0 { (a - x0) / (x1 - x0) } else { 0.0 };
        Ok(self.q_rate[i - 1] + t * (self.q_rate[i] - self.q_rate[i - 1]))
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Precondition("adherence grid is empty".into()));
    }
    for w in grid.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Precondition("adherence grid must be ascending".into()));
        }
    }
    if grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
        return Err(Error::Domain {
            what: "adherence grid",
            value: if grid[0] < 0.0 { grid[0] } else { grid[grid.len() - 1] },
            expected: "[0, 1]",
        });
    }
    Ok(())
}

pub fn q_mfe_stationary(
    params: &ModelParams,
    prior: &BeliefPrior,
    grid: &[f64],
) -> Result<EquilibriumSolution> {
    params.validate()?;
    check_grid(grid)?;
    let s = params.threshold();
    let mean_base = try_belief_moment(prior, |a| q_no_interaction(a, params))?;
    let mean_slope = try_belief_moment(prior, |a| affine_coefficients(a, params).map(|c| c.1))?;
    let denom = 1.0 - mean_slope;
    if denom.abs() <= 1e-14 {
        return Err(Error::IllPosed(format!(
            "1 - <eps_q nu_xbar> = {denom:e}; the median rate is not determined"
        )));
    }
    let q_tilde_star = (mean_base - mean_slope * s) / denom;

    let mut sol = EquilibriumSolution {
        params: *params,
        prior: *prior,
        q_tilde_star,
        grid: grid.to_vec(),
        q_rate: Vec::with_capacity(grid.len()),
        threshold: s,
        crossing: None,
        converged: false,
        iterations: 1,
        residual: f64::NAN,
        warnings: Vec::new(),
    };
    for &a in grid {
        let q = sol.rate_at(a)?;
        sol.q_rate.push(q);
    }
    let averaged = try_belief_moment(prior, |a| sol.rate_at(a))?;
    sol.residual = (averaged - q_tilde_star).abs();
    sol.converged = sol.residual <= 1e-8;
    if let Some(i) = sol.q_rate.iter().position(|&q| q < 0.0) {
        sol.warnings.push(format!(
            "negative extraction rate {} at a = {}; parameters lie outside the economically meaningful region",
            sol.q_rate[i], grid[i]
        ));
    }
    sol.crossing = locate_crossing(&sol)?;
    Ok(sol)
}

/// First adherence where the policy crosses the threshold, refined by bisection to 1e-8.
fn locate_crossing(sol: &EquilibriumSolution) -> Result<Option<f64>> {
    let d: Vec<f64> = sol.q_rate.iter().map(|q| q - sol.threshold).collect();
    for i in 0..d.len().saturating_sub(1) {
        let (d0, d1) = (d[i], d[i + 1]);
        if (d0 > 0.0) == (d1 > 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (sol.grid[i], sol.grid[i + 1]);
        let above_lo = d0 > 0.0;
        while hi - lo > 1e-8 {
            let mid = 0.5 * (lo + hi);
            if (sol.rate_at(mid)? - sol.threshold > 0.0) == above_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(Some(0.5 * (lo + hi)));
    }
    Ok(None)
}
