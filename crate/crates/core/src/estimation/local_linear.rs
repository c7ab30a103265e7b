use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, DEFAULT_SEED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearOptions {
    pub n_boot: usize,
    pub seed: u64,
    /// Evaluation points; defaults to 51 points spanning the data.
    pub eval_x: Option<Vec<f64>>,
    pub bandwidth_grid_points: usize,
}

impl Default for LocalLinearOptions {
    fn default() -> Self {
        LocalLinearOptions {
            n_boot: 500,
            seed: DEFAULT_SEED,
            eval_x: None,
            bandwidth_grid_points: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearFit {
    pub bandwidth: f64,
    /// True when the CV minimum sits at the widest bandwidth, i.e. the data
    /// prefer the global linear fit.
    pub bandwidth_at_upper_limit: bool,
    pub eval_x: Vec<f64>,
    pub fit: Vec<f64>,
    pub slope: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cv_profile: Vec<(f64, f64)>,
    /// Additive year intercepts removed before smoothing (mean zero).
    pub year_effects: BTreeMap<i32, f64>,
}

fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Local-linear estimate (level, slope) at `x0`, optionally skipping index `skip`.
fn local_fit(xs: &[f64], ys: &[f64], x0: f64, h: f64, skip: Option<usize>) -> Option<(f64, f64)> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = x - x0;
        let w = epanechnikov(d / h);
        if w == 0.0 {
            continue;
        }
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        t0 += w * y;
        t1 += w * d * y;
    }
    let det = s0 * s2 - s1 * s1;
    if !(s0 > 0.0) || det <= 1e-12 * s0 * s2.max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(((s2 * t0 - s1 * t1) / det, (s0 * t1 - s1 * t0) / det))
}

fn loo_cv(xs: &[f64], ys: &[f64], h: f64) -> f64 {
    let mut sse = 0.0;
    for i in 0..xs.len() {
        match local_fit(xs, ys, xs[i], h, Some(i)) {
            Some((m, _)) => sse += (ys[i] - m).powi(2),
            None => return f64::INFINITY,
        }
    }
    sse / xs.len() as f64
}

fn smooth_at(xs: &[f64], ys: &[f64], h: f64, at: &[f64]) -> Vec<f64> {
    at.iter()
        .map(|&x| local_fit(xs, ys, x, h, None).map_or(f64::NAN, |f| f.0))
        .collect()
}

/// Removes additive year intercepts by backfitting against the smoother.
fn remove_year_effects(
    xs: &[f64],
    ys: &[f64],
    years: &[i32],
    h: f64,
) -> (Vec<f64>, BTreeMap<i32, f64>) {
    let mut effects: BTreeMap<i32, f64> = years.iter().map(|&y| (y, 0.0)).collect();
    let mut adjusted = ys.to_vec();
    for _ in 0..100 {
        let fitted = smooth_at(xs, &adjusted, h, xs);
        let mut sums: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
        for i in 0..xs.len() {
            let e = sums.entry(years[i]).or_insert((0.0, 0));
            e.0 += ys[i] - fitted[i];
            e.1 += 1;
        }
        let mut new: BTreeMap<i32, f64> =
            sums.iter().map(|(&y, &(s, c))| (y, s / c as f64)).collect();
        let centre = new.values().sum::<f64>() / new.len() as f64;
        new.values_mut().for_each(|v| *v -= centre);
        let change = new
            .iter()
            .map(|(y, v)| (v - effects[y]).abs())
            .fold(0.0, f64::max);
        effects = new;
        adjusted = ys
            .iter()
            .zip(years)
            .map(|(y, yr)| y - effects[yr])
            .collect();
        if change < 1e-12 || !change.is_finite() {
            break;
        }
    }
    (adjusted, effects)
}

fn select_bandwidth(xs: &[f64], ys: &[f64], n_grid: usize) -> Result<(f64, bool, Vec<(f64, f64)>)> {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::Data("local-linear regressor has no spread".into()));
    }
    let (hmin, hmax) = (range * 2.0 / (xs.len() as f64).sqrt().max(4.0), 2.0 * range);
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| hmin * (hmax / hmin).powf(i as f64 / (n_grid - 1) as f64))
        .collect();
    let profile: Vec<(f64, f64)> = grid.par_iter().map(|&h| (h, loo_cv(xs, ys, h))).collect();
    let best = profile
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1.is_finite())
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i);
    match best {
        Some(i) if i > 0 => Ok((profile[i].0, i == profile.len() - 1, profile)),
        _ => Err(Error::SearchFailed {
            what: "local-linear bandwidth".into(),
            profile,
        }),
    }
}

/// Local-linear Epanechnikov smoother with leave-one-out least-squares CV
/// bandwidth and a pairs-bootstrap 95% band.
pub fn local_linear_fit(
    x: &[f64],
    y: &[f64],
    year_tags: Option<&[i32]>,
    opts: &LocalLinearOptions,
) -> Result<LocalLinearFit> {
    let n = x.len();
    if n < 30 {
        return Err(Error::Data(format!("local_linear_fit needs n >= 30, got {n}")));
    }
    if y.len() != n || year_tags.is_some_and(|t| t.len() != n) {
        return Err(Error::Data("x, y and year tags must have equal length".into()));
    }
    if opts.bandwidth_grid_points < 3 {
        return Err(Error::Precondition("bandwidth grid needs at least 3 points".into()));
    }
    let (mut h, mut at_upper, mut profile) = select_bandwidth(x, y, opts.bandwidth_grid_points)?;
    let (ys, year_effects) = match year_tags {
        Some(tags) => {
            let (adj, eff) = remove_year_effects(x, y, tags, h);
            let sel = select_bandwidth(x, &adj, opts.bandwidth_grid_points)?;
            h = sel.0;
            at_upper = sel.1;
            profile = sel.2;
            (adj, eff)
        }
        None => (y.to_vec(), BTreeMap::new()),
    };
    let eval_x = opts.eval_x.clone().unwrap_or_else(|| {
        let (lo, hi) = x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        (0..51).map(|i| lo + (hi - lo) * i as f64 / 50.0).collect()
    });
    let fits: Vec<(f64, f64)> = eval_x
        .iter()
        .map(|&e| local_fit(x, &ys, e, h, None).unwrap_or((f64::NAN, f64::NAN)))
        .collect();

    let boots: Vec<Vec<f64>> = (0..opts.n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(opts.seed, "local-linear-bootstrap", b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let bx: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let by: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
            smooth_at(&bx, &by, h, &eval_x)
        })
        .collect();
    let quantile = |v: &mut Vec<f64>, p: f64| -> f64 {
        v.retain(|x| x.is_finite());
        if v.is_empty() {
            return f64::NAN;
        }
        v.sort_by(f64::total_cmp);
        let pos = p * (v.len() - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        if i + 1 < v.len() {
            v[i] + frac * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    let mut lower = Vec::with_capacity(eval_x.len());
    let mut upper = Vec::with_capacity(eval_x.len());
    for j in 0..eval_x.len() {
        let mut col: Vec<f64> = boots.iter().map(|b| b[j]).collect();
        lower.push(quantile(&mut col, 0.025));
        upper.push(quantile(&mut col, 0.975));
    }
    Ok(LocalLinearFit {
        bandwidth: h,
        bandwidth_at_upper_limit: at_upper,
        eval_x,
        fit: fits.iter().map(|f| f.0).collect(),
        slope: fits.iter().map(|f| f.1).collect(),
        lower,
        upper,
        cv_profile: profile,
        year_effects,
    })
}
