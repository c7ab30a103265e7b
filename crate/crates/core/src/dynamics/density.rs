use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quadrature::integrate_adaptive;

/// Parameters of a log-normal (optionally reflected) transition density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    /// Effective log drift `mu - sigma^2/2 - rate`.
    pub mu_star: f64,
    pub sigma: f64,
    pub x0: f64,
    /// Reflecting upper boundary `S`.
    pub cap: Option<f64>,
}

impl DensitySpec {
    pub fn new(mu_star: f64, sigma: f64, x0: f64, cap: Option<f64>) -> Result<Self> {
        let s = DensitySpec {
            mu_star,
            sigma,
            x0,
            cap,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_model(params: &ModelParams, rate: f64, x0: f64, cap: Option<f64>) -> Result<Self> {
        DensitySpec::new(params.threshold() - rate, params.sigma, x0, cap)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain {
                what: "sigma",
                value: self.sigma,
                expected: "(0, inf)",
            });
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::Domain {
                what: "x0",
                value: self.x0,
                expected: "(0, inf)",
            });
        }
        if !self.mu_star.is_finite() {
            return Err(Error::InvalidParams("mu_star must be finite".into()));
        }
        if let Some(s) = self.cap {
            if !(s >= self.x0) {
                return Err(Error::Precondition(format!(
                    "cap S = {s} must be at least x0 = {}",
                    self.x0
                )));
            }
        }
        Ok(())
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Phi(x)`, accurate far into the lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

fn check_point(x: f64, t: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            expected: "(0, inf)",
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            what: "t",
            value: t,
            expected: "(0, inf)",
        });
    }
    Ok(())
}

/// Density of `X_t` given `X_0 = x0` for a GBM with log drift `mu_star`.
pub fn lognormal_tpd(x: f64, t: f64, spec: &DensitySpec) -> Result<f64> {
    spec.validate()?;
    check_point(x, t)?;
    if spec.cap.is_some() {
        return Err(Error::Precondition(
            "lognormal_tpd takes an uncapped spec; use reflected_tpd".into(),
        ));
    }
    let s = spec.sigma * t.sqrt();
    let z = ((x / spec.x0).ln() - spec.mu_star * t) / s;
    Ok((-0.5 * z * z).exp() / (x * s * (2.0 * PI).sqrt()))
}

/// Density of `X_t` for the log process reflected at `ln S`.
///
/// With `y = ln x`, `y0 = ln x0`, `b = ln S`, `m = mu_star`, `s = sigma sqrt(t)`:
/// a direct Gaussian term, an image term weighted by `exp(2m(b-y0)/sigma^2)`,
/// and a boundary-flux term `(2m/sigma^2) exp(-2m(b-y)/sigma^2) Phi((y+y0-2b+mt)/s)`.
pub fn reflected_tpd(x: f64, t: f64, spec: &DensitySpec) -> Result<f64> {
    spec.validate()?;
    check_point(x, t)?;
    let cap = spec.cap.ok_or_else(|| {
        Error::Precondition("reflected_tpd requires a cap S".into())
    })?;
    if x > cap {
        return Ok(0.0);
    }
    let (y, y0, b, m) = (x.ln(), spec.x0.ln(), cap.ln(), spec.mu_star);
    let v = spec.sigma * spec.sigma;
    let s = spec.sigma * t.sqrt();
    let ln_norm = -s.ln() - LN_SQRT_2PI;
    let z1 = (y - y0 - m * t) / s;
    let direct = (ln_norm - 0.5 * z1 * z1).exp();
    let z2 = (y + y0 - 2.0 * b - m * t) / s;
    let image = (2.0 * m * (b - y0) / v + ln_norm - 0.5 * z2 * z2).exp();
    let z3 = (y + y0 - 2.0 * b + m * t) / s;
    let flux = if m == 0.0 {
        0.0
    } else {
        2.0 * m / v * (-2.0 * m * (b - y) / v + ln_norm_cdf(z3)).exp()
    };
    Ok((direct + image + flux) / x)
}

/// Long-run density of `y = ln X` under reflection at `ln S`.
///
/// Zero probability flux gives `p(y) = C exp(kappa (y - ln S))` on `(-inf, ln S]`
/// with `kappa = 2 mu_s / sigma^2`, `mu_s = mu - sigma^2/2 - rate`; this is
/// integrable only for `mu_s > 0`. `C` is computed by quadrature.
pub fn stationary_density(y: f64, params: &ModelParams, rate: f64, cap: f64) -> Result<f64> {
    let kappa = stationary_kappa(params, rate, cap)?;
    let b = cap.ln();
    if y > b {
        return Ok(0.0);
    }
    let c = stationary_normalizer(kappa)?;
    Ok(c * (kappa * (y - b)).exp())
}

fn stationary_kappa(params: &ModelParams, rate: f64, cap: f64) -> Result<f64> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::Domain {
            what: "cap",
            value: cap,
            expected: "(0, inf)",
        });
    }
    if !(params.sigma > 0.0) {
        return Err(Error::Domain {
            what: "sigma",
            value: params.sigma,
            expected: "(0, inf)",
        });
    }
    let mu_s = params.threshold() - rate;
    if !(mu_s > 0.0) {
        return Err(Error::IllPosed(format!(
            "stationary density needs mu - sigma^2/2 - rate > 0, got {mu_s}; the reflected process drifts to 0"
        )));
    }
    Ok(2.0 * mu_s / (params.sigma * params.sigma))
}

fn stationary_normalizer(kappa: f64) -> Result<f64> {
    // mass beyond 60/kappa below ln S is exp(-60)
    let width = 60.0 / kappa;
    let mass = integrate_adaptive(|u| (-kappa * u).exp(), 0.0, width, 1e-13 / kappa)?;
    Ok(1.0 / mass)
}

/// CDF of the stationary log-cover distribution.
pub fn stationary_cdf(y: f64, params: &ModelParams, rate: f64, cap: f64) -> Result<f64> {
    let kappa = stationary_kappa(params, rate, cap)?;
    let b = cap.ln();
    Ok(if y >= b { 1.0 } else { (kappa * (y - b)).exp() })
}
