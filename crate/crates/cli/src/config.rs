//! JSON run configuration. Command-line flags override config fields, which
//! override built-in defaults. Relative paths inside a config file resolve
//! against the file's directory.

use std::path::{Path, PathBuf};

use forestmfg_core::equilibrium::Bequest;
use forestmfg_core::instrument::ZVariant;
use forestmfg_core::{BeliefPrior, ModelParams};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Inline parameter object or a path to a JSON file.
    pub params: Option<Value>,
    pub prior: Option<Value>,
    pub grid_points: Option<usize>,
    pub horizon: Option<f64>,
    pub time_points: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub bequest: Option<Bequest>,
    pub input: Option<PathBuf>,
    pub base_year: Option<i32>,
    pub end_year: Option<i32>,
    pub k: Option<f64>,
    pub moments: Option<String>,
    pub n_boot: Option<usize>,
    pub adherence: Option<f64>,
    pub rate: Option<f64>,
    pub x0: Option<f64>,
    pub dt: Option<f64>,
    pub cap: Option<f64>,
    pub paths: Option<usize>,
    pub units: Option<PathBuf>,
    pub transmitters: Option<PathBuf>,
    pub density: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub floor_dbm: Option<f64>,
    pub variant: Option<ZVariant>,
    pub homeland_lat: Option<f64>,
    pub homeland_lon: Option<f64>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        require_file(path, "--config")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for p in [&mut cfg.input, &mut cfg.units, &mut cfg.transmitters, &mut cfg.density]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = cfg.base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn params(&self, flag: Option<&Path>) -> Result<ModelParams, CliError> {
        self.object(flag, "--params", self.params.as_ref(), "params")
            .map(|p| p.unwrap_or_else(ModelParams::table5))
    }

    pub fn prior(&self, flag: Option<&Path>) -> Result<BeliefPrior, CliError> {
        self.object(flag, "--prior", self.prior.as_ref(), "prior")
            .map(|p| p.unwrap_or_else(BeliefPrior::table5))
    }

    fn object<T: DeserializeOwned>(
        &self,
        flag: Option<&Path>,
        flag_name: &str,
        value: Option<&Value>,
        field: &str,
    ) -> Result<Option<T>, CliError> {
        if let Some(path) = flag {
            return read_json(path, flag_name).map(Some);
        }
        match value {
            None => Ok(None),
            Some(Value::String(s)) => {
                let p = self.base_dir.join(s);
                read_json(&p, &format!("config field `{field}`")).map(Some)
            }
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::Input(format!("config field `{field}`: {e}"))),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    require_file(path, what)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{what}: cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{what} ({}): {e}", path.display())))
}

pub fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{what}: file not found: {}", path.display())))
    }
}

/// Positive, finite tolerance.
pub fn require_positive(v: f64, what: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Input(format!("{what} must be positive, got {v}")))
    }
}
