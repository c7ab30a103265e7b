//! Pentecostal-exposure instrument: linguistic and great-circle distance,
//! free-space radio exposure, the composite index and a 2SLS harness.

mod geo;
mod index;
mod iv;
mod linguistic;
mod radio;

pub use geo::{haversine_km, EARTH_RADIUS_KM};
pub use index::{
    build_exposure, read_density_csv, read_density_path, read_transmitters_csv,
    read_transmitters_path, read_units_csv, read_units_path, write_exposure_csv, z_index,
    DensityRecord, ExposureInput, ExposureRow, InstrumentConfig, UnitLocation, ZVariant,
};
pub use iv::{iv_2sls, iv_2sls_with, IvResult, WEAK_INSTRUMENT_F};
pub use linguistic::{linguistic_distance, LanguageClassification};
pub use radio::{
    best_signal_dbm, free_space_loss_db, free_space_signal_dbm, free_space_signal_dbm_with,
    normalize_exposure, TransmitterSpec, DEFAULT_FLOOR_DBM, DIPOLE_GAIN_DB,
};
