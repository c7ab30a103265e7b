use statrs::function::gamma::{digamma, ln_gamma};

use super::EstimationResult;
use crate::error::{Error, Result};
use crate::special::trigamma;

const CLAMP: f64 = 1e-6;

fn beta_loglik(a: f64, b: f64, n: f64, sum_ln: f64, sum_ln1m: f64) -> f64 {
    n * (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)) + (a - 1.0) * sum_ln + (b - 1.0) * sum_ln1m
}

/// Beta maximum likelihood by Newton's method from the moment-matching start.
pub fn fit_beliefs(adherences: &[f64]) -> Result<EstimationResult> {
    let n = adherences.len();
    if n < 10 {
        return Err(Error::Data(format!("fit_beliefs needs at least 10 values, got {n}")));
    }
    if let Some(v) = adherences.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain {
            what: "adherence",
            value: *v,
            expected: "[0, 1]",
        });
    }
    let clamped = adherences
        .iter()
        .filter(|&&v| v < CLAMP || v > 1.0 - CLAMP)
        .count();
    let xs: Vec<f64> = adherences.iter().map(|v| v.clamp(CLAMP, 1.0 - CLAMP)).collect();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var <= 1e-20 * mean * mean {
        return Err(Error::Data("adherence sample has zero variance".into()));
    }
    let sum_ln: f64 = xs.iter().map(|x| x.ln()).sum();
    let sum_ln1m: f64 = xs.iter().map(|x| (1.0 - x).ln()).sum();

    let common = mean * (1.0 - mean) / var - 1.0;
    let (mut a, mut b) = if common > 0.0 {
        (mean * common, (1.0 - mean) * common)
    } else {
        (1.0, 1.0)
    };
    let ll_start = beta_loglik(a, b, nf, sum_ln, sum_ln1m);
    let mut ll = ll_start;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 200 {
        iterations += 1;
        let psi_ab = digamma(a + b);
        let ga = nf * (psi_ab - digamma(a)) + sum_ln;
        let gb = nf * (psi_ab - digamma(b)) + sum_ln1m;
        let t_ab = trigamma(a + b);
        let haa = nf * (t_ab - trigamma(a));
        let hbb = nf * (t_ab - trigamma(b));
        let hab = nf * t_ab;
        let det = haa * hbb - hab * hab;
        // Newton direction -H^{-1} g
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (a + step * da, b + step * db);
            if na > 0.0 && nb > 0.0 {
                let nll = beta_loglik(na, nb, nf, sum_ln, sum_ln1m);
                if nll >= ll - 1e-12 * ll.abs() {
                    a = na;
                    b = nb;
                    ll = nll;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted || (da.abs() <= 1e-12 * a && db.abs() <= 1e-12 * b) {
            converged = ga.abs().max(gb.abs()) <= 1e-6 * nf;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "Beta maximum likelihood".into(),
            iterations,
            residual: f64::NAN,
        });
    }
    // inverse observed information
    let t_ab = trigamma(a + b);
    let iaa = nf * (trigamma(a) - t_ab);
    let ibb = nf * (trigamma(b) - t_ab);
    let iab = -nf * t_ab;
    let det = iaa * ibb - iab * iab;
    let mut r = EstimationResult::new(n);
    r.estimate("alpha", a, (ibb / det).sqrt());
    r.estimate("beta", b, (iaa / det).sqrt());
    r.converged = true;
    r.diag("log_likelihood", ll);
    r.diag("log_likelihood_start", ll_start);
    r.diag("alpha_start", if common > 0.0 { mean * common } else { 1.0 });
    r.diag("beta_start", if common > 0.0 { (1.0 - mean) * common } else { 1.0 });
    r.diag("iterations", iterations as f64);
    r.diag("clamped", clamped as f64);
    Ok(r)
}
