use crate::error::{Error, Result};

/// IUGG mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

pub(crate) fn check_coords(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::Domain {
            what: "latitude",
            value: lat,
            expected: "[-90, 90]",
        });
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::Domain {
            what: "longitude",
            value: lon,
            expected: "[-180, 180]",
        });
    }
    Ok(())
}

/// Great-circle distance in km between two points given in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64> {
    check_coords(lat1, lon1)?;
    check_coords(lat2, lon2)?;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_distances() {
        assert_eq!(haversine_km(6.37, 2.43, 6.37, 2.43).unwrap(), 0.0);
        let anti = haversine_km(0.0, 0.0, 0.0, 180.0).unwrap();
        assert!((anti - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9);
        let d = haversine_km(6.37, 2.43, 6.50, 2.60).unwrap();
        assert!((d - 23.702_287_97).abs() < 1e-6, "{d}");
        assert!(haversine_km(91.0, 0.0, 0.0, 0.0).is_err());
    }
}
