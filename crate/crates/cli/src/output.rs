use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use forestmfg_core::plot::{write_plot_data, PlotData};
use serde::Serialize;

use crate::CliError;

/// Result files for one run, all under one directory.
pub struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Input(format!("--out-dir: cannot create {}: {e}", dir.display())))?;
        Ok(Outputs { dir })
    }

    pub fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        Ok((path, BufWriter::new(f)))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| write_err(&path, e))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| write_err(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn plot<D: PlotData + ?Sized>(&self, name: &str, data: &D) -> Result<PathBuf, CliError> {
        let (path, w) = self.create(name)?;
        write_plot_data(data, w).map_err(|e| write_err(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}
