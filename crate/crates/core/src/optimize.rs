//! Derivative-free scalar minimisation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Brent's method on `[lo, hi]` (golden section with parabolic steps).
pub fn brent_minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum { x, fx, iterations }
}

/// Coarse grid scan followed by Brent refinement inside the best cell.
///
/// Fails with the evaluated profile when the best grid point sits on the
/// bracket edge, i.e. no interior minimum was located.
pub fn grid_then_brent<F: FnMut(f64) -> f64>(
    mut f: F,
    grid: &[f64],
    tol: f64,
    what: &str,
) -> Result<Minimum> {
    assert!(grid.len() >= 3);
    let profile: Vec<(f64, f64)> = grid.iter().map(|&x| (x, f(x))).collect();
    let best = profile
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1.is_finite())
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .map(|(i, _)| i);
    let Some(i) = best else {
        return Err(Error::SearchFailed {
            what: what.to_string(),
            profile,
        });
    };
    if i == 0 || i == grid.len() - 1 {
        return Err(Error::SearchFailed {
            what: what.to_string(),
            profile,
        });
    }
    let m = brent_minimize(&mut f, grid[i - 1], grid[i + 1], tol, 200);
    if m.fx > profile[i].1 {
        return Ok(Minimum {
            x: grid[i],
            fx: profile[i].1,
            iterations: m.iterations,
        });
    }
    Ok(m)
}
