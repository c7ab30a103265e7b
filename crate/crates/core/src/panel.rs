//! Long-format forest panel: one row per (unit, year).

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub unit_id: String,
    pub year: i32,
    pub tree_area_km2: f64,
    pub atr_share: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub records: Vec<PanelRecord>,
}

/// One-year transition of a unit's forest cover.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub unit_id: String,
    pub year: i32,
    pub x0: f64,
    pub x1: f64,
    pub atr_share: Option<f64>,
}

impl Panel {
    pub fn new(records: Vec<PanelRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            validate_record(r).map_err(|m| Error::Data(format!("record {}: {m}", i + 1)))?;
            if !seen.insert((r.unit_id.clone(), r.year)) {
                return Err(Error::Data(format!(
                    "record {}: duplicate (unit_id, year) = ({}, {})",
                    i + 1,
                    r.unit_id,
                    r.year
                )));
            }
        }
        Ok(Panel { records })
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv_reader(f)
    }

    /// Parses `unit_id,year,tree_area_km2,atr_share[,region]`; an empty
    /// `atr_share` is read as missing. Errors name the offending line.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for required in ["unit_id", "year", "tree_area_km2", "atr_share"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::Data(format!("missing column `{required}` in header")));
            }
        }
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for row in rdr.deserialize::<PanelRecord>() {
            let r = row.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::Data(format!("line {line}: {e}"))
            })?;
            let line = records.len() + 2;
            validate_record(&r).map_err(|m| Error::Data(format!("line {line}: {m}")))?;
            if !seen.insert((r.unit_id.clone(), r.year)) {
                return Err(Error::Data(format!(
                    "line {line}: duplicate (unit_id, year) = ({}, {})",
                    r.unit_id, r.year
                )));
            }
            records.push(r);
        }
        Ok(Panel { records })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["unit_id", "year", "tree_area_km2", "atr_share"])?;
        for r in &self.records {
            w.write_record([
                r.unit_id.clone(),
                r.year.to_string(),
                crate::plot::fmt_g12(r.tree_area_km2),
                r.atr_share.map(crate::plot::fmt_g12).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Records grouped by unit, each sorted by year.
    pub fn by_unit(&self) -> BTreeMap<&str, Vec<&PanelRecord>> {
        let mut m: BTreeMap<&str, Vec<&PanelRecord>> = BTreeMap::new();
        for r in &self.records {
            m.entry(r.unit_id.as_str()).or_default().push(r);
        }
        for v in m.values_mut() {
            v.sort_by_key(|r| r.year);
        }
        m
    }

    /// All consecutive-year pairs, in unit then year order.
    pub fn transitions(&self) -> Vec<Transition> {
        let mut out = Vec::new();
        for (unit, rows) in self.by_unit() {
            for w in rows.windows(2) {
                if w[1].year == w[0].year + 1 {
                    out.push(Transition {
                        unit_id: unit.to_string(),
                        year: w[0].year,
                        x0: w[0].tree_area_km2,
                        x1: w[1].tree_area_km2,
                        atr_share: w[0].atr_share,
                    });
                }
            }
        }
        out
    }

    /// Restricts to records carrying the given region tag.
    pub fn region(&self, tag: &str) -> Panel {
        Panel {
            records: self
                .records
                .iter()
                .filter(|r| r.region.as_deref() == Some(tag))
                .cloned()
                .collect(),
        }
    }

    pub fn get(&self, unit_id: &str, year: i32) -> Option<&PanelRecord> {
        self.records
            .iter()
            .find(|r| r.unit_id == unit_id && r.year == year)
    }
}

fn validate_record(r: &PanelRecord) -> std::result::Result<(), String> {
    if r.unit_id.is_empty() {
        return Err("empty unit_id".into());
    }
    if !(r.tree_area_km2 > 0.0 && r.tree_area_km2.is_finite()) {
        return Err(format!("tree_area_km2 = {} must be > 0", r.tree_area_km2));
    }
    if let Some(a) = r.atr_share {
        if !(0.0..=1.0).contains(&a) {
            return Err(format!("atr_share = {a} not in [0, 1]"));
        }
    }
    Ok(())
}
