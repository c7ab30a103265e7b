use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional rule-of-thumb cut-off for the first-stage F.
pub const WEAK_INSTRUMENT_F: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvResult {
    pub beta_iv: f64,
    pub se_iv: f64,
    pub first_stage_coef: f64,
    pub first_stage_se: f64,
    /// Heteroskedasticity-robust (HC1) first-stage F.
    pub f_stat: f64,
    pub beta_ols: f64,
    pub se_ols: f64,
    pub n: usize,
    pub n_groups: usize,
}

fn demean<G: Eq + Hash>(v: &[f64], groups: Option<&[G]>) -> Vec<f64> {
    match groups {
        None => {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| x - m).collect()
        }
        Some(g) => {
            let mut acc: HashMap<&G, (f64, usize)> = HashMap::new();
            for (x, k) in v.iter().zip(g) {
                let e = acc.entry(k).or_insert((0.0, 0));
                e.0 += x;
                e.1 += 1;
            }
            v.iter()
                .zip(g)
                .map(|(x, k)| {
                    let (s, c) = acc[k];
                    x - s / c as f64
                })
                .collect()
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Slope of `v` on `w` (both demeaned) with its HC1 standard error, using
/// `inst` as instrument (`inst == w` gives OLS).
fn robust_slope(v: &[f64], w: &[f64], inst: &[f64], dof: f64) -> (f64, f64) {
    let b = dot(inst, v) / dot(inst, w);
    let meat: f64 = inst
        .iter()
        .zip(v.iter().zip(w))
        .map(|(z, (y, x))| {
            let e = y - b * x;
            z * z * e * e
        })
        .sum();
    let bread = dot(inst, w);
    (b, (dof * meat / (bread * bread)).sqrt())
}

/// Just-identified two-stage least squares with optional within-group
/// demeaning. Fails when the first-stage F is below [`WEAK_INSTRUMENT_F`].
pub fn iv_2sls<G: Eq + Hash>(y: &[f64], x: &[f64], z: &[f64], groups: Option<&[G]>) -> Result<IvResult> {
    iv_2sls_with(y, x, z, groups, WEAK_INSTRUMENT_F)
}

pub fn iv_2sls_with<G: Eq + Hash>(
    y: &[f64],
    x: &[f64],
    z: &[f64],
    groups: Option<&[G]>,
    min_f: f64,
) -> Result<IvResult> {
    let n = y.len();
    if n <= 10 {
        return Err(Error::Data(format!("iv_2sls needs n > 10, got {n}")));
    }
    if x.len() != n || z.len() != n || groups.is_some_and(|g| g.len() != n) {
        return Err(Error::Data("y, x, z and group ids must have equal length".into()));
    }
    if y.iter().chain(x).chain(z).any(|v| !v.is_finite()) {
        return Err(Error::Data("iv_2sls inputs must be finite".into()));
    }
    let n_groups = match groups {
        Some(g) => g.iter().collect::<std::collections::HashSet<_>>().len(),
        None => 1,
    };
    let k = n_groups + 1;
    if n <= k {
        return Err(Error::Data("more groups than residual degrees of freedom".into()));
    }
    let dof = n as f64 / (n - k) as f64;
    let (yd, xd, zd) = (demean(y, groups), demean(x, groups), demean(z, groups));
    let (szz, sxx, szx) = (dot(&zd, &zd), dot(&xd, &xd), dot(&zd, &xd));
    if !(szz > 0.0 && sxx > 0.0) {
        return Err(Error::Data("regressor or instrument has no within-group variation".into()));
    }
    let (pi, se_pi) = robust_slope(&xd, &zd, &zd, dof);
    let f_stat = (pi / se_pi).powi(2);
    if szx.abs() <= 1e-12 * (szz * sxx).sqrt() || !(f_stat >= min_f) {
        return Err(Error::WeakInstrument {
            f_stat,
            threshold: min_f,
        });
    }
    let (beta_iv, se_iv) = robust_slope(&yd, &xd, &zd, dof);
    let (beta_ols, se_ols) = robust_slope(&yd, &xd, &xd, dof);
    Ok(IvResult {
        beta_iv,
        se_iv,
        first_stage_coef: pi,
        first_stage_se: se_pi,
        f_stat,
        beta_ols,
        se_ols,
        n,
        n_groups,
    })
}
