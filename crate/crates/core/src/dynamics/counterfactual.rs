use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    classify_sustainability, q_mfe_stationary, q_no_interaction, EquilibriumSolution,
    Sustainability,
};
use crate::error::{Error, Result};
use crate::model::{BeliefPrior, ModelParams};
use crate::panel::Panel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRow {
    pub unit: String,
    pub atr_share: f64,
    pub observed: Option<f64>,
    pub predicted: f64,
    pub counterfactual: f64,
    /// `observed - counterfactual`, km².
    pub diff_km2: Option<f64>,
    /// `100 * (observed - counterfactual) / observed`.
    pub diff_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub years: (i32, i32),
    pub rows: Vec<CounterfactualRow>,
    /// Units without usable data at the base year, with the reason.
    pub missing: Vec<(String, String)>,
    pub counterfactual_rate: f64,
    pub q_tilde_star: f64,
    pub threshold: f64,
    pub counterfactual_class: Sustainability,
    /// Mean of `observed - counterfactual` over units observed at the end year.
    pub mean_diff_km2_observed: Option<f64>,
    /// Mean difference as a percentage of mean observed cover.
    pub mean_diff_pct_observed: Option<f64>,
    /// Same summaries with the model prediction in place of the observation.
    pub mean_diff_km2_predicted: f64,
    pub mean_diff_pct_predicted: f64,
}

/// Projects each unit from `t0` to `t1` under its equilibrium rate and under
/// the `a = 0` rate with all adherence removed.
pub fn counterfactual_panel(
    panel: &Panel,
    params: &ModelParams,
    prior: &BeliefPrior,
    years: (i32, i32),
) -> Result<CounterfactualReport> {
    let (t0, t1) = years;
    if t1 <= t0 {
        return Err(Error::Precondition(format!("end year {t1} must follow base year {t0}")));
    }
    let eq = q_mfe_stationary(params, prior, &[0.0, 1.0])?;
    counterfactual_with(panel, &eq, years)
}

pub fn counterfactual_with(
    panel: &Panel,
    eq: &EquilibriumSolution,
    years: (i32, i32),
) -> Result<CounterfactualReport> {
    let (t0, t1) = years;
    let params = &eq.params;
    let dt = f64::from(t1 - t0);
    let g = params.threshold();
    let cf_rate = q_no_interaction(0.0, params)?;
    let cf_growth = ((g - cf_rate) * dt).exp();

    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for (unit, recs) in panel.by_unit() {
        let Some(base) = recs.iter().find(|r| r.year == t0) else {
            missing.push((unit.to_string(), format!("no record in {t0}")));
            continue;
        };
        let Some(a) = base.atr_share else {
            missing.push((unit.to_string(), format!("no atr_share in {t0}")));
            continue;
        };
        let x0 = base.tree_area_km2;
        let rate = eq.rate_at(a)?;
        let predicted = x0 * ((g - rate) * dt).exp();
        let counterfactual = x0 * cf_growth;
        let observed = recs.iter().find(|r| r.year == t1).map(|r| r.tree_area_km2);
        rows.push(CounterfactualRow {
            unit: unit.to_string(),
            atr_share: a,
            observed,
            predicted,
            counterfactual,
            diff_km2: observed.map(|o| o - counterfactual),
            diff_pct: observed.map(|o| 100.0 * (o - counterfactual) / o),
        });
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("no unit has usable data in {t0}")));
    }
    let mean = |v: Vec<f64>| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let n = rows.len() as f64;
    let cf_class = {
        let mut point = eq.clone();
        point.grid = vec![0.0];
        point.q_rate = vec![cf_rate];
        point.crossing = None;
        classify_sustainability(&point)
    };
    Ok(CounterfactualReport {
        years,
        mean_diff_km2_observed: mean(rows.iter().filter_map(|r| r.diff_km2).collect()),
        mean_diff_pct_observed: {
            let obs: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| r.observed.map(|o| (o, r.counterfactual)))
                .collect();
            let total: f64 = obs.iter().map(|p| p.0).sum();
            (!obs.is_empty()).then(|| 100.0 * obs.iter().map(|p| p.0 - p.1).sum::<f64>() / total)
        },
        mean_diff_km2_predicted: rows.iter().map(|r| r.predicted - r.counterfactual).sum::<f64>() / n,
        mean_diff_pct_predicted: 100.0
            * rows.iter().map(|r| r.predicted - r.counterfactual).sum::<f64>()
            / rows.iter().map(|r| r.predicted).sum::<f64>(),
        rows,
        missing,
        counterfactual_rate: cf_rate,
        q_tilde_star: eq.q_tilde_star,
        threshold: eq.threshold,
        counterfactual_class: cf_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelRecord;

    fn rec(u: &str, y: i32, x: f64, a: Option<f64>) -> PanelRecord {
        PanelRecord {
            unit_id: u.into(),
            year: y,
            tree_area_km2: x,
            atr_share: a,
            region: None,
        }
    }

    #[test]
    fn zero_adherence_predicts_counterfactual() {
        let panel = Panel::new(vec![
            rec("A", 2002, 10.0, Some(0.0)),
            rec("A", 2013, 8.0, Some(0.0)),
            rec("B", 2002, 5.0, Some(0.0)),
            rec("C", 2013, 5.0, Some(0.3)),
            rec("D", 2002, 5.0, None),
        ])
        .unwrap();
        let r = counterfactual_panel(&panel, &ModelParams::table5(), &BeliefPrior::table5(), (2002, 2013))
            .unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert_eq!(row.predicted, row.counterfactual);
        }
        assert_eq!(r.missing.len(), 2);
        assert_eq!(r.counterfactual_class, Sustainability::UnsustainableForAll);
        assert!(r.rows[1].observed.is_none());
    }
}
