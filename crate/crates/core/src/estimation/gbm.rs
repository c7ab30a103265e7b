use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EstimationResult;
use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::rng::{rng_for, DEFAULT_SEED};

/// Policy control assumed while the panel was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GbmControl {
    /// Uncontrolled growth (untouched areas).
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmOptions {
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for GbmOptions {
    fn default() -> Self {
        GbmOptions {
            n_boot: 3000,
            seed: DEFAULT_SEED,
        }
    }
}

/// Per-unit sufficient statistics of one-year log returns.
#[derive(Debug, Clone, Copy, Default)]
struct UnitStats {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

/// Closed-form maximiser of the log-normal transition likelihood.
fn closed_form(n: f64, sum: f64, sum_sq: f64) -> Option<(f64, f64)> {
    if n < 1.0 {
        return None;
    }
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    if !(var > 0.0) {
        return None;
    }
    Some((mean + 0.5 * var, var.sqrt()))
}

/// One-year log returns per unit, plus the number of skipped units.
fn unit_returns(panel: &Panel) -> (Vec<Vec<f64>>, usize) {
    let mut per_unit = Vec::new();
    let mut skipped = 0;
    for rows in panel.by_unit().values() {
        let r: Vec<f64> = rows
            .windows(2)
            .filter(|w| w[1].year == w[0].year + 1)
            .map(|w| (w[1].tree_area_km2 / w[0].tree_area_km2).ln())
            .collect();
        if r.is_empty() {
            skipped += 1;
        } else {
            per_unit.push(r);
        }
    }
    (per_unit, skipped)
}

/// Uncontrolled GBM drift and volatility from one-year transitions, with a
/// cluster bootstrap over units for standard errors.
pub fn fit_gbm(panel: &Panel, control: GbmControl, opts: &GbmOptions) -> Result<EstimationResult> {
    let GbmControl::None = control;
    let (per_unit, skipped) = unit_returns(panel);
    if per_unit.is_empty() {
        return Err(Error::Data(
            "no unit has two consecutive years; nothing to estimate".into(),
        ));
    }
    let stats: Vec<UnitStats> = per_unit
        .iter()
        .map(|r| UnitStats {
            n: r.len() as f64,
            sum: r.iter().sum(),
            sum_sq: r.iter().map(|v| v * v).sum(),
        })
        .collect();
    // centred variance for accuracy; the sufficient statistics serve the bootstrap
    let all: Vec<f64> = per_unit.iter().flatten().copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / all.len() as f64;
    if var <= 1e-20 * (1.0 + mean * mean) {
        return Err(Error::Data("log returns have zero variance (deterministic growth)".into()));
    }
    let (mu, sigma) = (mean + 0.5 * var, var.sqrt());

    let units = stats.len();
    let boot: Vec<(f64, f64)> = (0..opts.n_boot)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = rng_for(opts.seed, "gbm-bootstrap", b as u64);
            let mut acc = UnitStats::default();
            for _ in 0..units {
                let s = stats[rng.random_range(0..units)];
                acc.n += s.n;
                acc.sum += s.sum;
                acc.sum_sq += s.sum_sq;
            }
            closed_form(acc.n, acc.sum, acc.sum_sq)
        })
        .collect();
    let sd = |v: Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
    };
    let (se_mu, se_sigma) = if boot.len() >= 2 {
        (
            sd(boot.iter().map(|b| b.0).collect()),
            sd(boot.iter().map(|b| b.1).collect()),
        )
    } else {
        (f64::NAN, f64::NAN)
    };

    let mut r = EstimationResult::new(all.len());
    r.estimate("mu", mu, se_mu);
    r.estimate("sigma", sigma, se_sigma);
    r.converged = true;
    r.diag("log_likelihood", log_likelihood(&all, mu, sigma, panel));
    r.diag("bootstrap_resamples", boot.len() as f64);
    r.diag("units", units as f64);
    r.diag("skipped_units", skipped as f64);
    Ok(r)
}

fn log_likelihood(returns: &[f64], mu: f64, sigma: f64, panel: &Panel) -> f64 {
    // the Jacobian term -ln x1 does not depend on the parameters
    let jac: f64 = panel
        .transitions()
        .iter()
        .map(|t| -t.x1.ln())
        .sum();
    returns
        .iter()
        .map(|r| {
            let e = r - mu + 0.5 * sigma * sigma;
            -sigma.ln() - 0.918_938_533_204_672_8 - e * e / (2.0 * sigma * sigma)
        })
        .sum::<f64>()
        + jac
}

/// Generic numerical maximisation of the same likelihood (Newton with
/// analytic derivatives); used to cross-check the closed form.
pub fn gbm_mle_numeric(panel: &Panel) -> Result<(f64, f64)> {
    let (per_unit, _) = unit_returns(panel);
    let r: Vec<f64> = per_unit.into_iter().flatten().collect();
    if r.len() < 2 {
        return Err(Error::Data("need at least two transitions".into()));
    }
    let n = r.len() as f64;
    let m = r.iter().sum::<f64>() / n;
    let sd = (r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Data("log returns have zero variance".into()));
    }
    let ll = |mu: f64, s: f64| -> f64 {
        r.iter()
            .map(|v| {
                let e = v - mu + 0.5 * s * s;
                -s.ln() - e * e / (2.0 * s * s)
            })
            .sum()
    };
    // deliberately crude start
    let (mut mu, mut s) = (0.0, 2.0 * sd);
    let mut cur = ll(mu, s);
    for _ in 0..500 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for v in &r {
            let e = v - mu + 0.5 * s * s;
            let s2 = s * s;
            g0 += e / s2;
            g1 += -1.0 / s - e / s + e * e / (s2 * s);
            h00 += -1.0 / s2;
            h01 += 1.0 / s - 2.0 * e / (s2 * s);
            h11 += 1.0 / s2 - 1.0 + 3.0 * e / s2 - 3.0 * e * e / (s2 * s2);
        }
        let det = h00 * h11 - h01 * h01;
        let (mut d0, mut d1) = (-(h11 * g0 - h01 * g1) / det, -(h00 * g1 - h01 * g0) / det);
        if !(det > 0.0 && h00 < 0.0) || (d0 * g0 + d1 * g1) <= 0.0 {
            // not an ascent direction: fall back to scaled gradient
            d0 = g0 * s * s / n;
            d1 = g1 * s * s / n;
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..80 {
            let (nm, ns) = (mu + step * d0, s + step * d1);
            if ns > 0.0 {
                let v = ll(nm, ns);
                if v >= cur {
                    mu = nm;
                    s = ns;
                    cur = v;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved || (d0.abs() < 1e-14 && d1.abs() < 1e-14 * s) {
            break;
        }
    }
    Ok((mu, s))
}
