use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::EstimationResult;
use crate::equilibrium::q_mfe_stationary;
use crate::error::{Error, Result};
use crate::model::{BeliefPrior, G1Form, G2Form, ModelParams};
use crate::optimize::grid_then_brent;
use crate::panel::Panel;

/// Ecological parameters held fixed while estimating `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl From<&ModelParams> for FixedParams {
    fn from(p: &ModelParams) -> Self {
        FixedParams {
            mu: p.mu,
            sigma: p.sigma,
            rho: p.rho,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentSet {
    /// `E[dX/X - (mu - q(a; gamma))] = 0`.
    MeanOnly,
    /// Adds `E[(dX/X - (mu - q(a; gamma)))^2 - sigma^2 dt] = 0`.
    MeanAndVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaOptions {
    pub lower: f64,
    pub upper: f64,
    pub grid_points: usize,
    pub tol: f64,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions {
            lower: 1.0 + 1e-6,
            upper: 50.0,
            grid_points: 80,
            tol: 1e-9,
        }
    }
}

struct Moments<'a> {
    growth: Vec<f64>,
    adherence: Vec<f64>,
    fixed: FixedParams,
    prior: &'a BeliefPrior,
    k: f64,
    set: MomentSet,
}

impl Moments<'_> {
    fn dim(&self) -> usize {
        match self.set {
            MomentSet::MeanOnly => 1,
            MomentSet::MeanAndVariance => 2,
        }
    }

    /// Per-observation moments, `n x m`; `None` outside the admissible region.
    fn per_obs(&self, gamma: f64) -> Option<DMatrix<f64>> {
        let p = ModelParams::new(
            self.fixed.mu,
            self.fixed.sigma,
            self.fixed.rho,
            gamma,
            G1Form::Unit,
            G2Form::PowA { k2: self.k },
        )
        .ok()?;
        let sol = q_mfe_stationary(&p, self.prior, &[0.0]).ok()?;
        let n = self.growth.len();
        let mut g = DMatrix::zeros(n, self.dim());
        let s2 = self.fixed.sigma * self.fixed.sigma;
        for i in 0..n {
            let q = sol.rate_at(self.adherence[i]).ok()?;
            let e = self.growth[i] - (self.fixed.mu - q);
            g[(i, 0)] = e;
            if self.set == MomentSet::MeanAndVariance {
                g[(i, 1)] = e * e - s2;
            }
        }
        Some(g)
    }

    fn mean(&self, gamma: f64) -> Option<DVector<f64>> {
        let g = self.per_obs(gamma)?;
        let n = g.nrows() as f64;
        Some(DVector::from_iterator(
            g.ncols(),
            g.column_iter().map(|c| c.sum() / n),
        ))
    }

    fn criterion(&self, gamma: f64, w: &DMatrix<f64>) -> f64 {
        match self.mean(gamma) {
            Some(m) => (m.transpose() * w * &m)[(0, 0)],
            None => f64::INFINITY,
        }
    }

    /// Centred covariance of the per-observation moments.
    fn covariance(&self, gamma: f64) -> Option<DMatrix<f64>> {
        let g = self.per_obs(gamma)?;
        let n = g.nrows() as f64;
        let m = DVector::from_iterator(g.ncols(), g.column_iter().map(|c| c.sum() / n));
        let mut s = DMatrix::zeros(g.ncols(), g.ncols());
        for row in g.row_iter() {
            let d = row.transpose() - &m;
            s += &d * d.transpose();
        }
        Some(s / n)
    }
}

fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Two-step GMM estimate of the CRRA curvature from stacked one-year growth
/// rates matched to adherence, with `g1 = 1` and `g2 = a^k`.
pub fn fit_gamma(
    panel: &Panel,
    fixed: FixedParams,
    prior: &BeliefPrior,
    k: f64,
    moments: MomentSet,
    opts: &GammaOptions,
) -> Result<EstimationResult> {
    if !(k > 0.0) {
        return Err(Error::Domain {
            what: "k",
            value: k,
            expected: "(0, inf)",
        });
    }
    if !(opts.lower > 0.0 && opts.upper > opts.lower && opts.grid_points >= 3) {
        return Err(Error::Precondition("invalid gamma search bracket".into()));
    }
    let obs: Vec<(f64, f64)> = panel
        .transitions()
        .into_iter()
        .filter_map(|t| t.atr_share.map(|a| ((t.x1 - t.x0) / t.x0, a)))
        .collect();
    if obs.len() < 2 {
        return Err(Error::Data(
            "fit_gamma needs one-year transitions with adherence".into(),
        ));
    }
    let m = Moments {
        growth: obs.iter().map(|o| o.0).collect(),
        adherence: obs.iter().map(|o| o.1).collect(),
        fixed,
        prior,
        k,
        set: moments,
    };
    let n = obs.len();
    let dim = m.dim();
    let grid = geometric_grid(opts.lower, opts.upper, opts.grid_points);

    let w1 = DMatrix::<f64>::identity(dim, dim);
    let first = grid_then_brent(|g| m.criterion(g, &w1), &grid, opts.tol, "GMM first step")?;
    let s1 = m
        .covariance(first.x)
        .ok_or_else(|| Error::IllPosed("moments undefined at the first-step estimate".into()))?;
    let w2 = s1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllPosed("singular moment covariance".into()))?;
    let second = grid_then_brent(|g| m.criterion(g, &w2), &grid, opts.tol, "GMM second step")?;
    let gamma = second.x;

    let h = 1e-4 * gamma;
    let (gp, gm) = match (m.mean(gamma + h), m.mean(gamma - h)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::IllPosed("moments undefined next to the estimate".into())),
    };
    let jac = (gp - gm) / (2.0 * h);
    let s = m
        .covariance(gamma)
        .ok_or_else(|| Error::IllPosed("moments undefined at the estimate".into()))?;
    let gwg = (jac.transpose() * &w2 * &jac)[(0, 0)];
    let meat = (jac.transpose() * &w2 * &s * &w2 * &jac)[(0, 0)];
    let var = meat / (gwg * gwg) / n as f64;

    let mut r = EstimationResult::new(n);
    r.estimate("gamma", gamma, var.max(0.0).sqrt());
    r.converged = true;
    r.diag("criterion", second.fx);
    r.diag("gamma_first_step", first.x);
    r.diag("iterations", (first.iterations + second.iterations) as f64);
    r.diag("n_moments", dim as f64);
    for i in 0..dim {
        for j in 0..dim {
            r.diag(format!("weight_{i}{j}"), w2[(i, j)]);
        }
    }
    if dim > 1 {
        let j = n as f64 * second.fx;
        let df = (dim - 1) as f64;
        let chi = ChiSquared::new(df).map_err(|e| Error::IllPosed(e.to_string()))?;
        r.diag("j_stat", j);
        r.diag("j_df", df);
        r.diag("j_pvalue", 1.0 - chi.cdf(j));
    }
    Ok(r)
}

/// GMM criterion profile with identity weighting, for diagnostics and tests.
pub fn gamma_criterion_profile(
    panel: &Panel,
    fixed: FixedParams,
    prior: &BeliefPrior,
    k: f64,
    moments: MomentSet,
    gammas: &[f64],
    weight: Option<&[f64]>,
) -> Vec<(f64, f64)> {
    let obs: Vec<(f64, f64)> = panel
        .transitions()
        .into_iter()
        .filter_map(|t| t.atr_share.map(|a| ((t.x1 - t.x0) / t.x0, a)))
        .collect();
    let m = Moments {
        growth: obs.iter().map(|o| o.0).collect(),
        adherence: obs.iter().map(|o| o.1).collect(),
        fixed,
        prior,
        k,
        set: moments,
    };
    let dim = m.dim();
    let w = match weight {
        Some(v) => DMatrix::from_row_slice(dim, dim, v),
        None => DMatrix::identity(dim, dim),
    };
    gammas.iter().map(|&g| (g, m.criterion(g, &w))).collect()
}
