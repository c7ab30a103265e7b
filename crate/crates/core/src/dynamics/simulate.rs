use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExactLogNormal,
    EulerMaruyama,
    /// Closed-form deterministic path (no noise).
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Trajectory {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty trajectory")
    }
}

const PATH_LABEL: &str = "path";

fn check_inputs(x0: f64, horizon: f64, dt: f64) -> Result<()> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::Domain {
            what: "x0",
            value: x0,
            expected: "(0, inf)",
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            what: "dt",
            value: dt,
            expected: "(0, inf)",
        });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Domain {
            what: "horizon",
            value: horizon,
            expected: "[0, inf)",
        });
    }
    Ok(())
}

/// Step sizes covering `[0, horizon]`; the last step is shortened if needed.
fn steps(horizon: f64, dt: f64) -> Vec<f64> {
    let n = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    (0..n)
        .map(|i| {
            let t0 = i as f64 * dt;
            (horizon - t0).min(dt)
        })
        .collect()
}

struct Stepper {
    drift: f64,
    sigma: f64,
    mu_minus_rate: f64,
    log_cap: Option<f64>,
}

impl Stepper {
    fn new(rate: f64, params: &ModelParams, cap: Option<f64>) -> Self {
        let rate = rate.max(0.0);
        Stepper {
            drift: params.mu - rate - 0.5 * params.sigma * params.sigma,
            sigma: params.sigma,
            mu_minus_rate: params.mu - rate,
            log_cap: cap.map(f64::ln),
        }
    }

    fn run<R: Rng>(&self, x0: f64, hs: &[f64], scheme: Scheme, rng: &mut R, keep: bool) -> Vec<f64> {
        let mut out = Vec::with_capacity(if keep { hs.len() + 1 } else { 1 });
        let mut x = x0;
        if keep {
            out.push(x);
        }
        for &h in hs {
            let z: f64 = match scheme {
                Scheme::Deterministic => 0.0,
                _ => rng.sample(StandardNormal),
            };
            x = match scheme {
                Scheme::ExactLogNormal | Scheme::Deterministic => {
                    let mut y = x.ln() + self.drift * h + self.sigma * h.sqrt() * z;
                    if let Some(b) = self.log_cap {
                        if y > b {
                            y = 2.0 * b - y;
                        }
                    }
                    y.exp()
                }
                Scheme::EulerMaruyama => {
                    let next = x + self.mu_minus_rate * x * h + self.sigma * x * h.sqrt() * z;
                    let next = next.max(f64::MIN_POSITIVE);
                    match self.log_cap {
                        Some(b) if next.ln() > b => (2.0 * b - next.ln()).exp(),
                        _ => next,
                    }
                }
            };
            if keep {
                out.push(x);
            }
        }
        if !keep {
            out.push(x);
        }
        out
    }
}

fn times(hs: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0];
    let mut acc = 0.0;
    for &h in hs {
        acc += h;
        t.push(acc);
    }
    t
}

/// Forest cover under the linear policy `q = rate * X`, exact log-normal steps.
pub fn simulate_path(
    x0: f64,
    rate: f64,
    params: &ModelParams,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_path_with(x0, rate, params, horizon, dt, seed, Scheme::ExactLogNormal)
}

pub fn simulate_path_with(
    x0: f64,
    rate: f64,
    params: &ModelParams,
    horizon: f64,
    dt: f64,
    seed: u64,
    scheme: Scheme,
) -> Result<Trajectory> {
    check_inputs(x0, horizon, dt)?;
    let hs = steps(horizon, dt);
    let mut rng = rng_for(seed, PATH_LABEL, 0);
    let values = Stepper::new(rate, params, None).run(x0, &hs, scheme, &mut rng, true);
    Ok(Trajectory {
        times: times(&hs),
        values,
        seed,
        scheme,
    })
}

/// Exact log-normal steps reflected about `ln S` in log space.
pub fn simulate_reflected(
    x0: f64,
    rate: f64,
    params: &ModelParams,
    cap: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    check_inputs(x0, horizon, dt)?;
    if !(x0 <= cap) {
        return Err(Error::Precondition(format!("x0 = {x0} must not exceed the cap S = {cap}")));
    }
    let hs = steps(horizon, dt);
    let mut rng = rng_for(seed, PATH_LABEL, 0);
    let mut values =
        Stepper::new(rate, params, Some(cap)).run(x0, &hs, Scheme::ExactLogNormal, &mut rng, true);
    for v in values.iter_mut() {
        // guard against exp(ln S) rounding one ulp above S
        *v = v.min(cap);
    }
    Ok(Trajectory {
        times: times(&hs),
        values,
        seed,
        scheme: Scheme::ExactLogNormal,
    })
}

/// Terminal values of `n` independent paths; path `i` draws from the stream
/// keyed by `(seed, "path", i)`, so path 0 matches [`simulate_path`].
#[allow(clippy::too_many_arguments)]
pub fn simulate_endpoints(
    x0: f64,
    rates: &[f64],
    params: &ModelParams,
    cap: Option<f64>,
    horizon: f64,
    dt: f64,
    seed: u64,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    check_inputs(x0, horizon, dt)?;
    if let Some(s) = cap {
        if !(x0 <= s) {
            return Err(Error::Precondition(format!("x0 = {x0} must not exceed the cap S = {s}")));
        }
    }
    let hs = steps(horizon, dt);
    Ok(rates
        .par_iter()
        .enumerate()
        .map(|(i, &rate)| {
            let mut rng = rng_for(seed, PATH_LABEL, i as u64);
            let v = Stepper::new(rate, params, cap).run(x0, &hs, scheme, &mut rng, false)[0];
            cap.map_or(v, |s| v.min(s))
        })
        .collect())
}

/// Deterministic median-cover path `x0 * exp((mu - sigma^2/2 - q_tilde) t)`.
pub fn median_cover_path(
    xbar0: f64,
    eq: &EquilibriumSolution,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_inputs(xbar0, horizon, dt)?;
    let g = eq.threshold - eq.q_tilde_star;
    let t = times(&steps(horizon, dt));
    let values = t.iter().map(|&s| xbar0 * (g * s).exp()).collect();
    Ok(Trajectory {
        times: t,
        values,
        seed: 0,
        scheme: Scheme::Deterministic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{G1Form, G2Form};

    fn flat(sigma: f64) -> ModelParams {
        ModelParams::new(0.05, sigma, 0.06, 2.0, G1Form::Unit, G2Form::Zero).unwrap()
    }

    #[test]
    fn deterministic_limits() {
        let p = flat(0.0);
        let c = simulate_path(10.0, 0.05, &p, 20.0, 0.5, 1).unwrap();
        assert!(c.values.iter().all(|&v| (v - 10.0).abs() < 1e-12));
        let g = simulate_path(10.0, 0.0, &p, 20.0, 0.5, 1).unwrap();
        for (t, v) in g.times.iter().zip(&g.values) {
            assert!((v - 10.0 * (0.05 * t).exp()).abs() < 1e-10);
        }
        assert_eq!(g.times.len(), 41);
        assert!((g.times[40] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_paths_are_reproducible() {
        let p = flat(0.3);
        let a = simulate_path(5.0, 0.01, &p, 30.0, 1.0, 9).unwrap();
        let b = simulate_path(5.0, 0.01, &p, 30.0, 1.0, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(5.0, 0.01, &p, 30.0, 1.0, 10).unwrap();
        assert_ne!(a.values, c.values);
        let ends = simulate_endpoints(5.0, &[0.01; 3], &p, None, 30.0, 1.0, 9, Scheme::ExactLogNormal)
            .unwrap();
        assert_eq!(ends[0].to_bits(), a.last().to_bits());
    }

    #[test]
    fn reflection() {
        let p = flat(0.3);
        let free = simulate_path(1.0, 0.0, &p, 10.0, 0.1, 4).unwrap();
        let refl = simulate_reflected(1.0, 0.0, &p, 1e12, 10.0, 0.1, 4).unwrap();
        assert_eq!(free.values, refl.values);
        let capped = simulate_reflected(3.0, 0.0, &p, 3.0, 50.0, 0.1, 4).unwrap();
        assert!(capped.values.iter().all(|&v| v <= 3.0));
        assert!(simulate_reflected(4.0, 0.0, &p, 3.0, 1.0, 1.0, 4).is_err());
    }

    #[test]
    fn euler_stays_positive() {
        let p = flat(0.8);
        let t = simulate_path_with(1.0, 0.0, &p, 50.0, 1.0, 3, Scheme::EulerMaruyama).unwrap();
        assert!(t.values.iter().all(|&v| v > 0.0));
    }
}
