//! Tidy CSV emitters for plotting, 12 significant digits throughout.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{CounterfactualReport, Trajectory};
use crate::equilibrium::{EquilibriumSolution, FiniteHorizonSolution};
use crate::error::{Error, Result};

/// `%.12g`-style formatting.
pub fn fmt_g12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Density evaluated on a grid of abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityGrid {
    pub fn from_fn<F: Fn(f64) -> f64>(lo: f64, hi: f64, n: usize, f: F) -> Self {
        let x: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let density = x.iter().map(|&v| f(v)).collect();
        DensityGrid { x, density }
    }

    pub fn trapezoid(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
            .sum()
    }
}

/// Anything that can be written as a tidy table.
pub trait PlotData {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

impl PlotData for EquilibriumSolution {
    fn header(&self) -> Vec<&'static str> {
        vec!["a", "q_rate", "threshold"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.grid
            .iter()
            .zip(&self.q_rate)
            .map(|(&a, &q)| vec![fmt_g12(a), fmt_g12(q), fmt_g12(self.threshold)])
            .collect()
    }
}

impl PlotData for Trajectory {
    fn header(&self) -> Vec<&'static str> {
        vec!["time", "value"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.times
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| vec![fmt_g12(t), fmt_g12(v)])
            .collect()
    }
}

impl PlotData for DensityGrid {
    fn header(&self) -> Vec<&'static str> {
        vec!["x", "density"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.x
            .iter()
            .zip(&self.density)
            .map(|(&x, &d)| vec![fmt_g12(x), fmt_g12(d)])
            .collect()
    }
}

impl PlotData for FiniteHorizonSolution {
    fn header(&self) -> Vec<&'static str> {
        vec!["a", "time", "rate"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for (i, &a) in self.adherence_grid.iter().enumerate() {
            for (j, &t) in self.time_grid.iter().enumerate() {
                out.push(vec![fmt_g12(a), fmt_g12(t), fmt_g12(self.rate_path[i][j])]);
            }
        }
        out
    }
}

impl PlotData for CounterfactualReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["unit", "observed", "predicted", "counterfactual", "diff_km2", "diff_pct"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map(fmt_g12).unwrap_or_default();
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.unit.clone(),
                    opt(r.observed),
                    fmt_g12(r.predicted),
                    fmt_g12(r.counterfactual),
                    opt(r.diff_km2),
                    opt(r.diff_pct),
                ]
            })
            .collect()
    }
}

pub fn write_plot_data<D: PlotData + ?Sized, W: Write>(data: &D, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.header())?;
    for row in data.rows() {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the tidy CSV for `data` to `path`.
pub fn emit_plot_data<D: PlotData + ?Sized>(data: &D, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
    write_plot_data(data, std::io::BufWriter::new(f))
}
