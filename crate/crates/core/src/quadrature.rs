//! Gaussian quadrature rules built by Golub–Welsch.
//!
//! Belief averages use Gauss–Jacobi rules whose weight function is the Beta
//! density itself, so the `a^(alpha-1)` endpoint singularity never reaches the
//! integrand. Integrands that are themselves non-smooth at the ends (fractional
//! powers of `a`) fall back to tanh-sinh on `f * pdf`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::model::BeliefPrior;

/// Nodes and weights of a Gaussian rule; weights sum to the total mass of
/// the weight function.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Rule for the measure with Jacobi matrix diagonal `diag` and squared
    /// off-diagonal `off_sq`, scaled to total mass `mass`.
    fn golub_welsch(diag: &[f64], off_sq: &[f64], mass: f64) -> Self {
        let n = diag.len();
        let mut j = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            j[(i, i)] = diag[i];
        }
        for i in 0..n - 1 {
            let b = off_sq[i].sqrt();
            j[(i, i + 1)] = b;
            j[(i + 1, i)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mass * v0 * v0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        GaussRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Gauss–Legendre rule on `[lo, hi]`.
    pub fn legendre(n: usize, lo: f64, hi: f64) -> Self {
        assert!(n >= 1);
        let diag = vec![0.0; n];
        let off_sq: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k * k / (4.0 * k * k - 1.0)
            })
            .collect();
        let mut r = Self::golub_welsch(&diag, &off_sq, 2.0);
        let (h, m) = (0.5 * (hi - lo), 0.5 * (hi + lo));
        for (x, w) in r.nodes.iter_mut().zip(r.weights.iter_mut()) {
            *x = m + h * *x;
            *w *= h;
        }
        r
    }

    /// Gauss rule on `[0, 1]` for the Beta(alpha, beta) probability measure.
    pub fn beta(prior: &BeliefPrior, n: usize) -> Self {
        assert!(n >= 1);
        // Jacobi weight (1-x)^a (1+x)^b on [-1, 1]; a <- beta-1, b <- alpha-1 under x = 2t - 1.
        let a = prior.beta - 1.0;
        let b = prior.alpha - 1.0;
        let ab = a + b;
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                let alpha_k = if k == 0 {
                    (b - a) / (ab + 2.0)
                } else {
                    let s = 2.0 * k as f64 + ab;
                    (b * b - a * a) / (s * (s + 2.0))
                };
                0.5 * (alpha_k + 1.0)
            })
            .collect();
        let off_sq: Vec<f64> = (1..n)
            .map(|k| {
                let kf = k as f64;
                let beta_k = if k == 1 {
                    4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
                } else {
                    let s = 2.0 * kf + ab;
                    4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
                };
                0.25 * beta_k
            })
            .collect();
        let mut r = Self::golub_welsch(&diag, &off_sq, 1.0);
        for x in r.nodes.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
        r
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

const BELIEF_TOL: f64 = 1e-8;
const BELIEF_ORDERS: [usize; 3] = [64, 128, 256];

type RuleKey = (u64, u64, usize);

fn cached_beta_rule(prior: &BeliefPrior, n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (prior.alpha.to_bits(), prior.beta.to_bits(), n);
    if let Some(r) = cache.lock().unwrap().get(&key) {
        return r.clone();
    }
    let rule = Arc::new(GaussRule::beta(prior, n));
    let mut guard = cache.lock().unwrap();
    if guard.len() > 4096 {
        guard.clear();
    }
    guard.insert(key, rule.clone());
    rule
}

/// `E[f(a)]` under the prior, escalating the rule order until successive
/// estimates agree to 1e-8.
pub fn belief_moment<F: Fn(f64) -> f64>(prior: &BeliefPrior, f: F) -> Result<f64> {
    match jacobi_moment(prior, &f) {
        Ok(v) => Ok(v),
        Err(Error::Quadrature { estimate, .. }) if estimate.is_finite() => {
            let (v, err) = tanh_sinh_moment(prior, &f);
            if v.is_finite() && err <= BELIEF_TOL {
                Ok(v)
            } else {
                Err(Error::Quadrature {
                    tol: BELIEF_TOL,
                    estimate: estimate.min(err),
                })
            }
        }
        Err(e) => Err(e),
    }
}

/// Splits at 1/2 and substitutes `a = t^(1/alpha)` on the left and
/// `1 - a = t^(1/beta)` on the right, which absorbs the Beta weight's endpoint
/// powers and leaves bounded integrands.
fn tanh_sinh_moment<F: Fn(f64) -> f64>(prior: &BeliefPrior, f: &F) -> (f64, f64) {
    let (al, be) = (prior.alpha, prior.beta);
    let tol = 0.01 * BELIEF_TOL;
    let left = quadrature::double_exponential::integrate(
        |t: f64| {
            let a = t.powf(1.0 / al);
            f(a) * (1.0 - a).powf(be - 1.0) / al
        },
        0.0,
        0.5f64.powf(al),
        tol,
    );
    let right = quadrature::double_exponential::integrate(
        |t: f64| {
            let b = t.powf(1.0 / be);
            f(1.0 - b) * (1.0 - b).powf(al - 1.0) / be
        },
        0.0,
        0.5f64.powf(be),
        tol,
    );
    let norm = (-ln_beta(al, be)).exp();
    (
        norm * (left.integral + right.integral),
        norm * (left.error_estimate + right.error_estimate),
    )
}

fn jacobi_moment<F: Fn(f64) -> f64>(prior: &BeliefPrior, f: &F) -> Result<f64> {
    let mut prev = cached_beta_rule(prior, BELIEF_ORDERS[0]).integrate(f);
    let mut estimate = f64::INFINITY;
    for &n in &BELIEF_ORDERS[1..] {
        let cur = cached_beta_rule(prior, n).integrate(f);
        estimate = (cur - prev).abs();
        if !cur.is_finite() {
            break;
        }
        if estimate <= BELIEF_TOL {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature {
        tol: BELIEF_TOL,
        estimate,
    })
}

/// Fallible variant of [`belief_moment`] for integrands that can fail.
pub fn try_belief_moment<F: Fn(f64) -> Result<f64>>(prior: &BeliefPrior, f: F) -> Result<f64> {
    let err = RefCell::new(None);
    let v = belief_moment(prior, |a| match f(a) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    });
    match err.into_inner() {
        Some(e) => Err(e),
        None => v,
    }
}

fn gl15() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(15, 0.0, 1.0))
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let r = gl15();
    let h = hi - lo;
    r.nodes
        .iter()
        .zip(&r.weights)
        .map(|(&x, &w)| w * h * f(lo + h * x))
        .sum()
}

/// Adaptive Gauss–Legendre integration on a finite interval.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut worst = 0.0f64;
    let mut stack = vec![(lo, hi, gl_panel(&f, lo, hi), 0u32)];
    while let Some((a, b, whole, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = gl_panel(&f, a, m);
        let right = gl_panel(&f, m, b);
        let err = (left + right - whole).abs();
        let local_tol = tol * (b - a) / (hi - lo);
        if err <= local_tol.max(1e-15 * (left + right).abs()) {
            total += left + right;
        } else if depth >= 40 {
            total += left + right;
            worst = worst.max(err);
        } else {
            stack.push((a, m, left, depth + 1));
            stack.push((m, b, right, depth + 1));
        }
    }
    if worst > tol {
        return Err(Error::Quadrature {
            tol,
            estimate: worst,
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = GaussRule::legendre(10, 0.0, 2.0);
        let v = r.integrate(|x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }

    #[test]
    fn beta_rule_moments() {
        let p = BeliefPrior::new(0.553, 2.251).unwrap();
        let r = GaussRule::beta(&p, 64);
        assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!((r.integrate(|a| a) - p.mean()).abs() < 1e-12);
    }

    #[test]
    fn belief_moment_examples() {
        let u = BeliefPrior::new(1.0, 1.0).unwrap();
        assert!((belief_moment(&u, |a| a).unwrap() - 0.5).abs() < 1e-12);
        let p = BeliefPrior::table5();
        assert!((belief_moment(&p, |a| a).unwrap() - 0.197_218_259_629_101_3).abs() < 1e-10);
        assert!((belief_moment(&p, |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn belief_moment_reports_failure() {
        let p = BeliefPrior::table5();
        let e = belief_moment(&p, |a| (200.0 * a).sin() * (1e3 * a).cos()).unwrap_err();
        assert!(matches!(e, Error::Quadrature { .. }));
    }

    #[test]
    fn fractional_powers_use_fallback() {
        let p = BeliefPrior::table5();
        for (p, k) in [(p, 0.2), (p, 3.7), (BeliefPrior::new(0.3, 0.3).unwrap(), 0.2)] {
            let v = belief_moment(&p, |a| a.powf(k)).unwrap();
            assert!((v - p.raw_moment(k)).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = integrate_adaptive(|x| (-(x - 0.3f64).powi(2) / 2e-6).exp(), 0.0, 1.0, 1e-12).unwrap();
        let exact = (2.0 * std::f64::consts::PI * 1e-6).sqrt();
        assert!((v - exact).abs() < 1e-10);
    }
}
