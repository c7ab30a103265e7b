//! Model-generated data sets with known truth.
//!
//! Every unit draws from its own stream keyed by (seed, unit index) and the
//! draws do not depend on the parameters, so two panels built from the same
//! seed share common random numbers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::equilibrium::q_mfe_stationary;
use crate::error::{Error, Result};
use crate::model::{BeliefPrior, ModelParams};
use crate::panel::{Panel, PanelRecord};
use crate::rng::rng_for;

/// Census-style layout: each base year is observed together with the
/// following year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesign {
    pub n_units: usize,
    pub base_years: Vec<i32>,
    pub x0_median_km2: f64,
    pub x0_log_sd: f64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        SyntheticDesign {
            n_units: 546,
            base_years: vec![1992, 2002, 2013],
            x0_median_km2: 50.0,
            x0_log_sd: 1.0,
        }
    }
}

impl SyntheticDesign {
    fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.base_years.is_empty() {
            return Err(Error::Precondition("design needs units and base years".into()));
        }
        if self.base_years.windows(2).any(|w| w[1] <= w[0] + 1) {
            return Err(Error::Precondition(
                "base years must be increasing and at least two years apart".into(),
            ));
        }
        if !(self.x0_median_km2 > 0.0 && self.x0_log_sd >= 0.0) {
            return Err(Error::Precondition("invalid initial-cover distribution".into()));
        }
        Ok(())
    }

    fn recorded(&self, year: i32) -> bool {
        self.base_years.iter().any(|&b| year == b || year == b + 1)
    }
}

fn beta_quantile(prior: &BeliefPrior, u: f64) -> Result<f64> {
    let d = Beta::new(prior.alpha, prior.beta).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(d.inverse_cdf(u).clamp(0.0, 1.0))
}

/// Adherence draws by inverse-CDF sampling.
pub fn beta_sample(prior: &BeliefPrior, n: usize, seed: u64) -> Result<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, "synthetic-unit", i as u64);
            beta_quantile(prior, rng.random::<f64>())
        })
        .collect()
}

/// Recorded (year, area) pairs of one unit with log-drift `drift`. The first
/// draw of the unit stream is reserved for its adherence.
fn unit_path(design: &SyntheticDesign, seed: u64, i: usize, drift: f64, sigma: f64) -> Vec<(i32, f64)> {
    let mut rng = rng_for(seed, "synthetic-unit", i as u64);
    let _adherence_uniform: f64 = rng.random();
    let z0: f64 = StandardNormal.sample(&mut rng);
    let mut x = design.x0_median_km2 * (design.x0_log_sd * z0).exp();
    let first = design.base_years[0];
    let last = *design.base_years.last().expect("non-empty") + 1;
    let mut out = Vec::new();
    for year in first..=last {
        if design.recorded(year) {
            out.push((year, x));
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        x *= (drift + sigma * z).exp();
    }
    out
}

/// Uncontrolled GBM panel without adherence.
pub fn gbm_panel(mu: f64, sigma: f64, design: &SyntheticDesign, seed: u64) -> Result<Panel> {
    design.validate()?;
    if !(sigma >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParams("gbm_panel needs finite mu and sigma >= 0".into()));
    }
    let mut records = Vec::new();
    for i in 0..design.n_units {
        let path = unit_path(design, seed, i, mu - 0.5 * sigma * sigma, sigma);
        records.extend(path.into_iter().map(|(year, x)| PanelRecord {
            unit_id: format!("U{i:04}"),
            year,
            tree_area_km2: x,
            atr_share: None,
            region: None,
        }));
    }
    Panel::new(records)
}

/// Panel generated by the stationary equilibrium: each unit draws a
/// time-invariant adherence from `prior` and follows the controlled GBM.
pub fn model_panel(
    params: &ModelParams,
    prior: &BeliefPrior,
    design: &SyntheticDesign,
    seed: u64,
) -> Result<Panel> {
    design.validate()?;
    let eq = q_mfe_stationary(params, prior, &[0.0, 1.0])?;
    let g = params.threshold();
    let mut records = Vec::new();
    for i in 0..design.n_units {
        let mut rng = rng_for(seed, "synthetic-unit", i as u64);
        let a = beta_quantile(prior, rng.random::<f64>())?;
        let rate = eq.rate_at(a)?.max(0.0);
        let path = unit_path(design, seed, i, g - rate, params.sigma);
        records.extend(path.into_iter().map(|(year, x)| PanelRecord {
            unit_id: format!("U{i:04}"),
            year,
            tree_area_km2: x,
            atr_share: Some(a),
            region: None,
        }));
    }
    Panel::new(records)
}

/// Endogenous linear design: `x = pi z + v`, `y = beta x + u` with
/// `u = rho v + sqrt(1 - rho^2) e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvSample {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn iv_sample(n: usize, beta: f64, pi: f64, rho: f64, seed: u64) -> Result<IvSample> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Domain {
            what: "rho",
            value: rho,
            expected: "[-1, 1]",
        });
    }
    let mut rng = rng_for(seed, "iv-sample", 0);
    let mut s = IvSample {
        y: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
    };
    let c = (1.0 - rho * rho).sqrt();
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let x = pi * z + v;
        s.z.push(z);
        s.x.push(x);
        s.y.push(beta * x + rho * v + c * e);
    }
    Ok(s)
}
