use serde::{Deserialize, Serialize};

use super::geo::{check_coords, haversine_km};
use crate::error::{Error, Result};

/// Half-wave dipole gain over isotropic, dB.
pub const DIPOLE_GAIN_DB: f64 = 2.15;
/// Default exposure floor, dBm.
pub const DEFAULT_FLOOR_DBM: f64 = -90.0;
const MIN_DISTANCE_KM: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterSpec {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub freq_mhz: f64,
    pub erp_dbm: f64,
    pub year_active: i32,
}

impl TransmitterSpec {
    pub fn validate(&self) -> Result<()> {
        check_coords(self.lat, self.lon)?;
        if !(self.freq_mhz > 0.0) {
            return Err(Error::Domain {
                what: "freq_mhz",
                value: self.freq_mhz,
                expected: "(0, inf)",
            });
        }
        if !self.erp_dbm.is_finite() {
            return Err(Error::Domain {
                what: "erp_dbm",
                value: self.erp_dbm,
                expected: "finite",
            });
        }
        Ok(())
    }
}

/// Free-space path loss, dB.
pub fn free_space_loss_db(freq_mhz: f64, d_km: f64) -> f64 {
    32.45 + 20.0 * freq_mhz.log10() + 20.0 * d_km.log10()
}

/// Received power at (`lat`, `lon`) under free-space propagation, with the
/// dipole-referenced ERP converted to EIRP by `eirp_offset_db`.
pub fn free_space_signal_dbm_with(
    tx: &TransmitterSpec,
    lat: f64,
    lon: f64,
    eirp_offset_db: f64,
) -> Result<f64> {
    tx.validate()?;
    let d = haversine_km(tx.lat, tx.lon, lat, lon)?;
    if d <= MIN_DISTANCE_KM {
        return Err(Error::Precondition(format!(
            "receiver within {MIN_DISTANCE_KM} km of transmitter `{}`",
            tx.name
        )));
    }
    Ok(tx.erp_dbm + eirp_offset_db - free_space_loss_db(tx.freq_mhz, d))
}

pub fn free_space_signal_dbm(tx: &TransmitterSpec, lat: f64, lon: f64) -> Result<f64> {
    free_space_signal_dbm_with(tx, lat, lon, DIPOLE_GAIN_DB)
}

/// Strongest signal over transmitters active in `year`, floored at `floor_dbm`.
pub fn best_signal_dbm(
    transmitters: &[TransmitterSpec],
    lat: f64,
    lon: f64,
    year: i32,
    floor_dbm: f64,
) -> Result<f64> {
    let mut best = floor_dbm;
    for tx in transmitters.iter().filter(|t| t.year_active <= year) {
        best = best.max(free_space_signal_dbm(tx, lat, lon)?);
    }
    Ok(best)
}

/// Maps signals to `[0, 1]`: 0 at the strongest signal in the sample, 1 at
/// the floor. Signals below the floor count as the floor. A sample without
/// variation maps to 1 everywhere.
pub fn normalize_exposure(signals: &[f64], floor_dbm: f64) -> Result<Vec<f64>> {
    if signals.is_empty() {
        return Err(Error::Precondition("normalize_exposure needs at least one signal".into()));
    }
    if let Some(s) = signals.iter().find(|s| s.is_nan()) {
        return Err(Error::Domain {
            what: "signal",
            value: *s,
            expected: "a number",
        });
    }
    let floored: Vec<f64> = signals.iter().map(|s| s.max(floor_dbm)).collect();
    let max = floored.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = floored.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return Ok(vec![1.0; signals.len()]);
    }
    let span = max - floor_dbm;
    Ok(floored.iter().map(|s| (max - s) / span).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(freq: f64, erp: f64) -> TransmitterSpec {
        TransmitterSpec {
            name: "t".into(),
            lat: 0.0,
            lon: 0.0,
            freq_mhz: freq,
            erp_dbm: erp,
            year_active: 1997,
        }
    }

    #[test]
    fn path_loss_arithmetic() {
        assert!((free_space_loss_db(1.0, 1.0) - 32.45).abs() < 1e-12);
        assert!((free_space_loss_db(100.0, 10.0) - 92.45).abs() < 1e-12);
        let t = tx(100.0, 60.0);
        let d1 = free_space_signal_dbm(&t, 0.05, 0.0).unwrap();
        let d2 = free_space_signal_dbm(&t, 0.1, 0.0).unwrap();
        assert!((d1 - d2 - 20.0 * 2f64.log10()).abs() < 1e-6);
        assert!(free_space_signal_dbm(&t, 0.0, 0.0).is_err());
    }

    #[test]
    fn ten_km_example() {
        // latitude offset giving exactly 10 km along a meridian
        let dlat = (10.0 / super::super::geo::EARTH_RADIUS_KM).to_degrees();
        let s = free_space_signal_dbm(&tx(100.0, 60.0), dlat, 0.0).unwrap();
        assert!((s + 30.3).abs() < 1e-9, "{s}");
    }

    #[test]
    fn normalization_endpoints() {
        let rp = normalize_exposure(&[-40.0, -90.0, -120.0, -65.0], -90.0).unwrap();
        assert_eq!(rp, vec![0.0, 1.0, 1.0, 0.5]);
        assert_eq!(normalize_exposure(&[-90.0; 4], -90.0).unwrap(), vec![1.0; 4]);
        assert!(normalize_exposure(&[], -90.0).is_err());
    }

    #[test]
    fn inactive_transmitters_ignored() {
        let t = tx(100.0, 60.0);
        assert_eq!(best_signal_dbm(&[t.clone()], 0.1, 0.0, 1992, -90.0).unwrap(), -90.0);
        assert!(best_signal_dbm(&[t], 0.1, 0.0, 2002, -90.0).unwrap() > -90.0);
    }
}
