//! Model parameters, belief-interaction exponents and elasticities.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Exponent on own extraction in the composite good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum G1Form {
    Unit,
    /// `1 - c * a^k1`
    OneMinusPowA { c: f64, k1: f64 },
}

/// Exponent on the median forest state in the composite good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum G2Form {
    Zero,
    /// `a^k2`
    PowA { k2: f64 },
}

impl Default for G1Form {
    fn default() -> Self {
        G1Form::Unit
    }
}

impl Default for G2Form {
    fn default() -> Self {
        G2Form::PowA { k2: 1.0 }
    }
}

/// Ecological and preference parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
    pub gamma: f64,
    pub g1_form: G1Form,
    pub g2_form: G2Form,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    mu: f64,
    sigma: f64,
    rho: f64,
    gamma: f64,
    #[serde(default)]
    g1_form: G1Form,
    #[serde(default)]
    g2_form: G2Form,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.mu, r.sigma, r.rho, r.gamma, r.g1_form, r.g2_form)
    }
}

impl ModelParams {
    pub fn new(
        mu: f64,
        sigma: f64,
        rho: f64,
        gamma: f64,
        g1_form: G1Form,
        g2_form: G2Form,
    ) -> Result<Self> {
        let p = ModelParams {
            mu,
            sigma,
            rho,
            gamma,
            g1_form,
            g2_form,
        };
        p.validate()?;
        Ok(p)
    }

    /// Calibrated values: mu 0.0482, sigma 0.258, rho 0.0487, gamma 2.272, g1 = 1, g2 = a.
    pub fn table5() -> Self {
        ModelParams {
            mu: 0.0482,
            sigma: 0.258,
            rho: 0.0487,
            gamma: 2.272,
            g1_form: G1Form::Unit,
            g2_form: G2Form::PowA { k2: 1.0 },
        }
    }

    /// Illustrative low-volatility set with the given curvature and exponents.
    pub fn illustrative(gamma: f64, g1_form: G1Form, g2_form: G2Form) -> Result<Self> {
        ModelParams::new(0.018, 0.05, 0.02, gamma, g1_form, g2_form)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        ModelParams::new(
            self.mu,
            self.sigma,
            self.rho,
            gamma,
            self.g1_form,
            self.g2_form,
        )
    }

    pub fn with_g2(&self, g2_form: G2Form) -> Result<Self> {
        ModelParams::new(
            self.mu,
            self.sigma,
            self.rho,
            self.gamma,
            self.g1_form,
            g2_form,
        )
    }

    /// Sustainability threshold `mu - sigma^2 / 2`.
    pub fn threshold(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.sigma, self.rho, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidParams(format!("sigma = {} < 0", self.sigma)));
        }
        if self.rho <= 0.0 {
            return Err(Error::InvalidParams(format!("rho = {} <= 0", self.rho)));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParams(format!("gamma = {} <= 0", self.gamma)));
        }
        if self.gamma == 1.0 {
            return Err(Error::InvalidParams(
                "gamma = 1 (log utility) is not supported".into(),
            ));
        }
        match self.g1_form {
            G1Form::Unit => {}
            G1Form::OneMinusPowA { c, k1 } => {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidParams(format!("g1_form.c = {c} not in [0,1]")));
                }
                if !(k1 > 0.0 && k1.is_finite()) {
                    return Err(Error::InvalidParams(format!("g1_form.k1 = {k1} <= 0")));
                }
            }
        }
        if let G2Form::PowA { k2 } = self.g2_form {
            if !(k2 > 0.0 && k2.is_finite()) {
                return Err(Error::InvalidParams(format!("g2_form.k2 = {k2} <= 0")));
            }
        }
        let (g, s2) = (self.gamma, 0.5 * self.sigma * self.sigma);
        let bound = self.mu * (1.0 - g) + s2 * g * (1.0 - g);
        if self.rho <= bound {
            return Err(Error::InvalidParams(format!(
                "rho = {} must exceed mu(1-gamma) + (sigma^2/2) gamma (1-gamma) = {bound}",
                self.rho
            )));
        }
        // 1 - g1(1-gamma) is affine in g1, so checking the range endpoints suffices.
        let g1_min = match self.g1_form {
            G1Form::Unit => 1.0,
            G1Form::OneMinusPowA { c, .. } => 1.0 - c,
        };
        for g1 in [g1_min, 1.0] {
            if 1.0 - g1 * (1.0 - g) <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "1 - g1(1-gamma) <= 0 at g1 = {g1}"
                )));
            }
        }
        Ok(())
    }
}

fn check_adherence(a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "adherence",
            value: a,
            expected: "[0, 1]",
        })
    }
}

pub fn g1(a: f64, params: &ModelParams) -> Result<f64> {
    check_adherence(a)?;
    Ok(match params.g1_form {
        G1Form::Unit => 1.0,
        G1Form::OneMinusPowA { c, k1 } => 1.0 - c * a.powf(k1),
    })
}

pub fn g2(a: f64, params: &ModelParams) -> Result<f64> {
    check_adherence(a)?;
    Ok(match params.g2_form {
        G2Form::Zero => 0.0,
        G2Form::PowA { k2 } => {
            if a == 0.0 {
                0.0
            } else {
                a.powf(k2)
            }
        }
    })
}

/// Elasticities of the CRRA composite at a given adherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Elasticities {
    pub eps_q: f64,
    pub nu_q: f64,
    pub nu_xbar: f64,
}

pub fn elasticities(a: f64, params: &ModelParams) -> Result<Elasticities> {
    let one_m_g = 1.0 - params.gamma;
    let nu_q = g1(a, params)? * one_m_g;
    let nu_xbar = g2(a, params)? * one_m_g;
    let denom = 1.0 - nu_q;
    if denom <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "1 - g1(a)(1-gamma) = {denom} <= 0 at a = {a}"
        )));
    }
    Ok(Elasticities {
        eps_q: 1.0 / denom,
        nu_q,
        nu_xbar,
    })
}

/// Beta(alpha, beta) distribution of adherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior")]
pub struct BeliefPrior {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawPrior> for BeliefPrior {
    type Error = Error;
    fn try_from(r: RawPrior) -> Result<Self> {
        BeliefPrior::new(r.alpha, r.beta)
    }
}

impl BeliefPrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} must be > 0")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParams(format!("beta = {beta} must be > 0")));
        }
        Ok(BeliefPrior { alpha, beta })
    }

    /// Beta(0.553, 2.251).
    pub fn table5() -> Self {
        BeliefPrior {
            alpha: 0.553,
            beta: 2.251,
        }
    }

    /// Prior with the given mean and the calibrated concentration `alpha + beta`.
    pub fn with_mean(mean: f64, concentration: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < 1.0) {
            return Err(Error::Domain {
                what: "prior mean",
                value: mean,
                expected: "(0, 1)",
            });
        }
        BeliefPrior::new(mean * concentration, (1.0 - mean) * concentration)
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    fn ln_beta_fn(&self) -> f64 {
        ln_gamma(self.alpha) + ln_gamma(self.beta) - ln_gamma(self.alpha + self.beta)
    }

    pub fn ln_pdf(&self, a: f64) -> f64 {
        if !(0.0..=1.0).contains(&a) {
            return f64::NEG_INFINITY;
        }
        (self.alpha - 1.0) * a.ln() + (self.beta - 1.0) * (1.0 - a).ln() - self.ln_beta_fn()
    }

    pub fn pdf(&self, a: f64) -> f64 {
        if !(0.0..=1.0).contains(&a) {
            return 0.0;
        }
        self.ln_pdf(a).exp()
    }

    pub fn cdf(&self, a: f64) -> f64 {
        if a <= 0.0 {
            0.0
        } else if a >= 1.0 {
            1.0
        } else {
            beta_reg(self.alpha, self.beta, a)
        }
    }

    /// `E[a^k]` in closed form, for real `k > -alpha`.
    pub fn raw_moment(&self, k: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        (ln_gamma(a + k) + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(a + b + k)).exp()
    }
}

/// `n` equally spaced points on `[0, 1]`.
pub fn adherence_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_forms() {
        let p = ModelParams::table5();
        assert_eq!(g1(0.0, &p).unwrap(), 1.0);
        let q = ModelParams::illustrative(
            2.2,
            G1Form::OneMinusPowA { c: 1.0, k1: 1.0 },
            G2Form::PowA { k2: 2.0 },
        )
        .unwrap();
        assert_eq!(g1(0.5, &q).unwrap(), 0.5);
        assert_eq!(g2(0.5, &q).unwrap(), 0.25);
        assert_eq!(g2(0.0, &q).unwrap(), 0.0);
        assert_eq!(g2(1.0, &q).unwrap(), 1.0);
        assert!(g1(1.5, &p).is_err());
        assert!(g2(-0.1, &p).is_err());
    }

    #[test]
    fn elasticities_at_zero() {
        let p = ModelParams::table5();
        let e = elasticities(0.0, &p).unwrap();
        assert!((e.eps_q - 0.440_140_845_070_422_56).abs() < 1e-15);
        assert_eq!(e.nu_q, 1.0 - 2.272);
        assert_eq!(e.nu_xbar, 0.0);
        let e1 = elasticities(1.0, &p).unwrap();
        assert_eq!(e1.nu_xbar, 1.0 - 2.272);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(0.05, 0.2, 0.05, 1.0, G1Form::Unit, G2Form::Zero).is_err());
        assert!(ModelParams::new(0.05, -0.2, 0.05, 2.0, G1Form::Unit, G2Form::Zero).is_err());
        assert!(ModelParams::new(0.05, 0.2, 0.0, 2.0, G1Form::Unit, G2Form::Zero).is_err());
        // gamma < 1 with a large drift violates well-posedness
        assert!(ModelParams::new(0.5, 0.0, 0.01, 0.5, G1Form::Unit, G2Form::Zero).is_err());
        assert!(BeliefPrior::new(0.0, 1.0).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let p = ModelParams::table5();
        let s = serde_json::to_string(&p).unwrap();
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        let bad = r#"{"mu":0.0482,"sigma":0.258,"rho":0.0487,"gamma":2.272,"extra":1}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
        let invalid = r#"{"mu":0.0482,"sigma":0.258,"rho":0.0487,"gamma":1.0}"#;
        assert!(serde_json::from_str::<ModelParams>(invalid).is_err());
        let prior: BeliefPrior = serde_json::from_str(r#"{"alpha":0.553,"beta":2.251}"#).unwrap();
        assert_eq!(prior, BeliefPrior::table5());
        assert!(serde_json::from_str::<BeliefPrior>(r#"{"alpha":1,"beta":1,"mean":0.5}"#).is_err());
    }

    #[test]
    fn raw_moments() {
        let p = BeliefPrior::table5();
        assert!((p.mean() - 0.197_218_259_629_101_3).abs() < 1e-15);
        assert!((p.raw_moment(1.0) - p.mean()).abs() < 1e-13);
        let m2 = p.alpha * (p.alpha + 1.0) / ((p.alpha + p.beta) * (p.alpha + p.beta + 1.0));
        assert!((p.raw_moment(2.0) - m2).abs() < 1e-13);
    }
}
