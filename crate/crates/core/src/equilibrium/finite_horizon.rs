use serde::{Deserialize, Serialize};

use super::stationary::{check_grid, q_mfe_stationary, q_no_interaction};
use crate::error::{Error, Result};
use crate::model::{adherence_grid, elasticities, BeliefPrior, ModelParams};
use crate::quadrature::try_belief_moment;

/// Terminal bequest weight `h(a) = intercept + slope * a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bequest {
    pub intercept: f64,
    pub slope: f64,
}

impl Default for Bequest {
    /// `h(a) = (1 + a) / 2`.
    fn default() -> Self {
        Bequest {
            intercept: 0.5,
            slope: 0.5,
        }
    }
}

impl Bequest {
    /// `h(a) = a`. Agents with `a = 0` then value the terminal stock infinitely
    /// and extract nothing.
    pub fn identity() -> Self {
        Bequest {
            intercept: 0.0,
            slope: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h0, h1) = (self.intercept, self.intercept + self.slope);
        if !(self.slope >= 0.0 && (0.0..=1.0).contains(&h0) && (0.0..=1.0).contains(&h1)) {
            return Err(Error::InvalidParams(format!(
                "bequest must be a nondecreasing map [0,1] -> [0,1], got h(0) = {h0}, h(1) = {h1}"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, a: f64) -> f64 {
        self.intercept + self.slope * a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteHorizonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FiniteHorizonOptions {
    fn default() -> Self {
        FiniteHorizonOptions {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteHorizonSolution {
    pub horizon: f64,
    pub time_grid: Vec<f64>,
    pub adherence_grid: Vec<f64>,
    pub median_rate_path: Vec<f64>,
    /// `rate_path[i][j]`: adherence `adherence_grid[i]` at time `time_grid[j]`.
    pub rate_path: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub sup_norm_residual: f64,
    pub residual_history: Vec<f64>,
    /// Number of (adherence, time) nodes evaluated at the `C = 0` limit.
    pub zero_c_nodes: usize,
}

#[derive(Clone, Copy)]
struct AgentCoefs {
    eps: f64,
    nu_q: f64,
    nu_x: f64,
    h: f64,
}

impl AgentCoefs {
    fn new(a: f64, params: &ModelParams, bequest: &Bequest) -> Result<Self> {
        let e = elasticities(a, params)?;
        Ok(AgentCoefs {
            eps: e.eps_q,
            nu_q: e.nu_q,
            nu_x: e.nu_xbar,
            h: bequest.eval(a),
        })
    }

    fn c(&self, params: &ModelParams, q_bar: f64) -> f64 {
        let s2 = 0.5 * params.sigma * params.sigma;
        params.mu * self.nu_q + (params.threshold() - q_bar) * self.nu_x + s2 * self.nu_q / self.eps
            - params.rho
    }

    /// Rate `1/w` where `w = f^eps` solves `w' + eps C w = -1`, `w(T) = 1/h`,
    /// at time-to-go `tau`. Returns the rate and whether `C` vanished.
    fn rate(&self, params: &ModelParams, q_bar: f64, tau: f64) -> (f64, bool) {
        let c = self.c(params, q_bar);
        let x = self.eps * c * tau;
        let growth = if x == 0.0 { tau } else { tau * x.exp_m1() / x };
        let w = x.exp() / self.h + growth;
        (1.0 / w, c.abs() < 1e-12)
    }
}

/// Finite-horizon equilibrium by Picard iteration on the median-rate path.
///
/// At each time node the coefficient `C` is frozen at the current median-rate
/// iterate, so every node is a scalar fixed point in `q_bar`.
pub fn q_mfe_finite_horizon(
    params: &ModelParams,
    prior: &BeliefPrior,
    horizon: f64,
    time_grid: &[f64],
    adherence: &[f64],
    bequest: &Bequest,
    opts: &FiniteHorizonOptions,
) -> Result<FiniteHorizonSolution> {
    params.validate()?;
    bequest.validate()?;
    check_grid(adherence)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain {
            what: "horizon",
            value: horizon,
            expected: "(0, inf)",
        });
    }
    if time_grid.is_empty() || time_grid.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::Precondition(format!(
            "time grid must be non-empty and lie in [0, {horizon}]"
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Precondition("tolerance and max_iter must be positive".into()));
    }

    let start = match q_mfe_stationary(params, prior, &[0.0]) {
        Ok(s) => s.q_tilde_star,
        Err(_) => q_no_interaction(0.0, params)?,
    };
    let mut q_bar = vec![start; time_grid.len()];
    let mut history = Vec::new();
    let mut converged = false;
    while history.len() < opts.max_iter {
        let mut residual = 0.0f64;
        let mut next = Vec::with_capacity(q_bar.len());
        for (&t, &qb) in time_grid.iter().zip(&q_bar) {
            let tau = horizon - t;
            let v = try_belief_moment(prior, |a| {
                Ok(AgentCoefs::new(a, params, bequest)?.rate(params, qb, tau).0)
            })?;
            residual = residual.max((v - qb).abs());
            next.push(v);
        }
        q_bar = next;
        history.push(residual);
        if residual < opts.tol {
            converged = true;
            break;
        }
    }

    let mut zero_c_nodes = 0;
    let mut rate_path = Vec::with_capacity(adherence.len());
    for &a in adherence {
        let coefs = AgentCoefs::new(a, params, bequest)?;
        let row = time_grid
            .iter()
            .zip(&q_bar)
            .map(|(&t, &qb)| {
                let (r, zero) = coefs.rate(params, qb, horizon - t);
                zero_c_nodes += zero as usize;
                r
            })
            .collect();
        rate_path.push(row);
    }
    let sup = *history.last().unwrap_or(&f64::NAN);
    if !converged {
        return Err(Error::NonConvergence {
            what: "finite-horizon median-rate iteration".into(),
            iterations: history.len(),
            residual: sup,
        });
    }
    Ok(FiniteHorizonSolution {
        horizon,
        time_grid: time_grid.to_vec(),
        adherence_grid: adherence.to_vec(),
        median_rate_path: q_bar,
        rate_path,
        converged,
        iterations: history.len(),
        sup_norm_residual: sup,
        residual_history: history,
        zero_c_nodes,
    })
}

/// Uniform time grid with `n` points on `[0, horizon]`.
pub fn time_grid(horizon: f64, n: usize) -> Vec<f64> {
    adherence_grid(n).into_iter().map(|u| u * horizon).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::G2Form;

    /// Independent oracle: RK4 integration of `w' = -1 - eps C w` backwards from `w(T) = 1/h`.
    fn rk4_rate(c: &AgentCoefs, params: &ModelParams, q_bar: f64, tau: f64) -> f64 {
        let k = c.eps * c.c(params, q_bar);
        // in time-to-go s: dw/ds = 1 + k w
        let f = |w: f64| 1.0 + k * w;
        let n = 20_000;
        let h = tau / n as f64;
        let mut w = 1.0 / c.h;
        for _ in 0..n {
            let k1 = f(w);
            let k2 = f(w + 0.5 * h * k1);
            let k3 = f(w + 0.5 * h * k2);
            let k4 = f(w + h * k3);
            w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        1.0 / w
    }

    #[test]
    fn closed_form_matches_ode_integration() {
        let p = ModelParams::table5();
        let b = Bequest::default();
        for &(a, qb, tau) in &[(0.0, 0.08, 10.0), (0.4, 0.05, 30.0), (1.0, 0.12, 3.5)] {
            let c = AgentCoefs::new(a, &p, &b).unwrap();
            let closed = c.rate(&p, qb, tau).0;
            let oracle = rk4_rate(&c, &p, qb, tau);
            assert!((closed - oracle).abs() < 1e-10, "{a} {closed} {oracle}");
        }
    }

    #[test]
    fn zero_c_limit() {
        let p = ModelParams::table5();
        let c = AgentCoefs::new(0.5, &p, &Bequest::default()).unwrap();
        // choose q_bar so that C = 0 exactly is approached
        let s2 = 0.5 * p.sigma * p.sigma;
        let q_bar = p.threshold()
            + (p.mu * c.nu_q + s2 * c.nu_q / c.eps - p.rho) / c.nu_x;
        let (r, zero) = c.rate(&p, q_bar, 7.0);
        assert!(zero);
        assert!((r - 1.0 / (1.0 / c.h + 7.0)).abs() < 1e-9);
    }

    #[test]
    fn boundary_and_no_coupling() {
        let p = ModelParams::table5().with_g2(G2Form::Zero).unwrap();
        let prior = BeliefPrior::table5();
        let grid = adherence_grid(11);
        let tg = time_grid(20.0, 21);
        let b = Bequest::default();
        let sol =
            q_mfe_finite_horizon(&p, &prior, 20.0, &tg, &grid, &b, &Default::default()).unwrap();
        assert!(sol.iterations <= 2);
        for (i, &a) in grid.iter().enumerate() {
            assert!((sol.rate_path[i][20] - b.eval(a)).abs() < 1e-15);
        }
    }
}
