use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::geo::{check_coords, haversine_km};
use super::linguistic::{linguistic_distance, LanguageClassification};
use super::radio::{best_signal_dbm, normalize_exposure, TransmitterSpec, DEFAULT_FLOOR_DBM};
use crate::error::{Error, Result};
use crate::plot::fmt_g12;

/// Instrument ablations: the full index, without the distance term, and
/// without the radio term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZVariant {
    #[default]
    Full,
    NoHd,
    NoRp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureInput {
    pub unit_id: String,
    pub year: i32,
    pub hd_km: f64,
    pub ld: f64,
    pub pent_density: f64,
    pub rp_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureRow {
    pub unit_id: String,
    pub year: i32,
    pub hd_km: f64,
    pub ld: f64,
    pub pent_density: f64,
    pub rp_c: f64,
    pub z: f64,
    pub z_no_hd: f64,
    pub z_no_rp: f64,
}

impl ExposureRow {
    pub fn value(&self, variant: ZVariant) -> f64 {
        match variant {
            ZVariant::Full => self.z,
            ZVariant::NoHd => self.z_no_hd,
            ZVariant::NoRp => self.z_no_rp,
        }
    }
}

fn check_input(r: &ExposureInput) -> Result<()> {
    let bad = |what: &'static str, value: f64, expected: &'static str| {
        Err(Error::Domain {
            what,
            value,
            expected,
        })
    };
    if !(r.hd_km >= 0.0 && r.hd_km.is_finite()) {
        return bad("hd_km", r.hd_km, "[0, inf)");
    }
    if !(0.0..=1.0).contains(&r.ld) {
        return bad("ld", r.ld, "[0, 1]");
    }
    if !(r.pent_density > 0.0 && r.pent_density.is_finite()) {
        return bad("pent_density", r.pent_density, "(0, inf)");
    }
    if !(0.0..=1.0).contains(&r.rp_c) {
        return bad("rp_c", r.rp_c, "[0, 1]");
    }
    Ok(())
}

/// `z = hd * ld / density * rp`, with the two ablated variants.
pub fn z_index(inputs: &[ExposureInput]) -> Result<Vec<ExposureRow>> {
    inputs
        .iter()
        .map(|r| {
            check_input(r).map_err(|e| Error::Data(format!("unit {} year {}: {e}", r.unit_id, r.year)))?;
            let nigeria = r.hd_km * r.ld / r.pent_density;
            Ok(ExposureRow {
                unit_id: r.unit_id.clone(),
                year: r.year,
                hd_km: r.hd_km,
                ld: r.ld,
                pent_density: r.pent_density,
                rp_c: r.rp_c,
                z: nigeria * r.rp_c,
                z_no_hd: r.ld / r.pent_density * r.rp_c,
                z_no_rp: nigeria,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitLocation {
    pub unit_id: String,
    pub lat: f64,
    pub lon: f64,
    pub language: LanguageClassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub year: i32,
    pub pentecostal_count: f64,
    pub land_area_km2: f64,
}

impl DensityRecord {
    pub fn density(&self) -> f64 {
        self.pentecostal_count / self.land_area_km2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentConfig {
    pub lambda: f64,
    pub floor_dbm: f64,
    /// Reference point for the distance term, degrees.
    pub homeland_lat: f64,
    pub homeland_lon: f64,
    pub reference: LanguageClassification,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        InstrumentConfig {
            lambda: 0.5,
            floor_dbm: DEFAULT_FLOOR_DBM,
            homeland_lat: 7.7,
            homeland_lon: 4.0,
            reference: LanguageClassification::yoruba(),
        }
    }
}

/// Builds the exposure index for every unit and every year in `densities`.
/// The radio term is normalized over the whole unit-year sample.
pub fn build_exposure(
    units: &[UnitLocation],
    transmitters: &[TransmitterSpec],
    densities: &[DensityRecord],
    cfg: &InstrumentConfig,
) -> Result<Vec<ExposureRow>> {
    if units.is_empty() || densities.is_empty() {
        return Err(Error::Data("instrument needs at least one unit and one density year".into()));
    }
    check_coords(cfg.homeland_lat, cfg.homeland_lon)?;
    for t in transmitters {
        t.validate()?;
    }
    for d in densities {
        if !(d.density() > 0.0 && d.density().is_finite()) {
            return Err(Error::Data(format!(
                "year {}: Pentecostal density must be positive, got {}",
                d.year,
                d.density()
            )));
        }
    }
    let per_unit: Vec<(f64, f64)> = units
        .iter()
        .map(|u| {
            Ok((
                haversine_km(u.lat, u.lon, cfg.homeland_lat, cfg.homeland_lon)?,
                linguistic_distance(&u.language, &cfg.reference, cfg.lambda)?,
            ))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, &DensityRecord)> = densities
        .iter()
        .flat_map(|d| (0..units.len()).map(move |i| (i, d)))
        .collect();
    let signals: Vec<f64> = cells
        .par_iter()
        .map(|&(i, d)| best_signal_dbm(transmitters, units[i].lat, units[i].lon, d.year, cfg.floor_dbm))
        .collect::<Result<_>>()?;
    let rp = normalize_exposure(&signals, cfg.floor_dbm)?;
    let inputs: Vec<ExposureInput> = cells
        .iter()
        .zip(rp)
        .map(|(&(i, d), rp_c)| ExposureInput {
            unit_id: units[i].unit_id.clone(),
            year: d.year,
            hd_km: per_unit[i].0,
            ld: per_unit[i].1,
            pent_density: d.density(),
            rp_c,
        })
        .collect();
    z_index(&inputs)
}

fn read_rows<T: DeserializeOwned, R: Read>(reader: R, required: &[&str], what: &str) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(Error::Data(format!("{what}: missing column `{col}` in header")));
        }
    }
    rdr.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::Data(format!("{what}: line {line}: {e}"))
            })
        })
        .collect()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

#[derive(Deserialize)]
struct UnitRaw {
    unit_id: String,
    lat: f64,
    lon: f64,
    language_nodes: String,
}

/// `unit_id,lat,lon,language_nodes` with semicolon-delimited nodes.
pub fn read_units_csv<R: Read>(reader: R) -> Result<Vec<UnitLocation>> {
    let raw: Vec<UnitRaw> = read_rows(reader, &["unit_id", "lat", "lon", "language_nodes"], "units")?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            check_coords(r.lat, r.lon).map_err(|e| Error::Data(format!("units: line {line}: {e}")))?;
            let name = r.language_nodes.rsplit(';').next().unwrap_or("").trim().to_string();
            let language = LanguageClassification::parse(name, &r.language_nodes)
                .map_err(|e| Error::Data(format!("units: line {line}: {e}")))?;
            Ok(UnitLocation {
                unit_id: r.unit_id,
                lat: r.lat,
                lon: r.lon,
                language,
            })
        })
        .collect()
}

/// `name,lat,lon,freq_mhz,erp_dbm,year_active`.
pub fn read_transmitters_csv<R: Read>(reader: R) -> Result<Vec<TransmitterSpec>> {
    let rows: Vec<TransmitterSpec> = read_rows(
        reader,
        &["name", "lat", "lon", "freq_mhz", "erp_dbm", "year_active"],
        "transmitters",
    )?;
    for (i, t) in rows.iter().enumerate() {
        t.validate()
            .map_err(|e| Error::Data(format!("transmitters: line {}: {e}", i + 2)))?;
    }
    Ok(rows)
}

/// `year,pentecostal_count,land_area_km2`.
pub fn read_density_csv<R: Read>(reader: R) -> Result<Vec<DensityRecord>> {
    let rows: Vec<DensityRecord> = read_rows(
        reader,
        &["year", "pentecostal_count", "land_area_km2"],
        "density",
    )?;
    for (i, d) in rows.iter().enumerate() {
        if !(d.pentecostal_count > 0.0 && d.land_area_km2 > 0.0) {
            return Err(Error::Data(format!(
                "density: line {}: pentecostal_count and land_area_km2 must be positive",
                i + 2
            )));
        }
    }
    Ok(rows)
}

pub fn read_units_path(path: &Path) -> Result<Vec<UnitLocation>> {
    read_units_csv(open(path)?)
}

pub fn read_transmitters_path(path: &Path) -> Result<Vec<TransmitterSpec>> {
    read_transmitters_csv(open(path)?)
}

pub fn read_density_path(path: &Path) -> Result<Vec<DensityRecord>> {
    read_density_csv(open(path)?)
}

/// Writes exposure rows; `instrument` repeats the selected variant.
pub fn write_exposure_csv<W: Write>(rows: &[ExposureRow], variant: ZVariant, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "unit_id", "year", "hd_km", "ld", "pent_density", "rp_c", "z", "z_no_hd", "z_no_rp", "instrument",
    ])?;
    for r in rows {
        w.write_record([
            r.unit_id.clone(),
            r.year.to_string(),
            fmt_g12(r.hd_km),
            fmt_g12(r.ld),
            fmt_g12(r.pent_density),
            fmt_g12(r.rp_c),
            fmt_g12(r.z),
            fmt_g12(r.z_no_hd),
            fmt_g12(r.z_no_rp),
            fmt_g12(r.value(variant)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
