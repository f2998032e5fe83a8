use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

const UNITS: &str = "energies in E_R, depths in E_R, times in ms, omega in rad/s, T in nK, entropy in bits";

/// Renders floats in shortest round-trip form or with fixed significant digits.
#[derive(Clone, Copy, Debug)]
pub struct Floats(pub Option<usize>);

impl Floats {
    pub fn fmt(self, x: f64) -> String {
        match self.0 {
            Some(digits) if x.is_finite() => format!("{:.*e}", digits.saturating_sub(1), x),
            _ if x == 0.0 || (1e-4..1e15).contains(&x.abs()) || !x.is_finite() => format!("{x}"),
            _ => format!("{x:e}"),
        }
    }

    pub fn opt(self, x: Option<f64>) -> String {
        x.map(|v| self.fmt(v)).unwrap_or_default()
    }
}

/// SHA-256 of the effective configuration, output directory excluded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.output.directory = PathBuf::new();
    format!("{:x}", Sha256::digest(cfg.to_toml().as_bytes()))
}

/// One CSV artifact with its metadata block.
pub struct Table {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(
        dir: &Path,
        name: &str,
        command: &str,
        cfg: &ExperimentConfig,
        extra: &[String],
        header: &[&str],
    ) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut file = BufWriter::new(File::create(&path)?);
        writeln!(file, "# latticesim {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(file, "# command: {command}")?;
        writeln!(file, "# config_sha256: {}", config_hash(cfg))?;
        writeln!(file, "# units: {UNITS}")?;
        for line in extra {
            writeln!(file, "# {line}")?;
        }
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header).map_err(csv_error)?;
        Ok(Self { path, inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(csv_error)
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.inner.flush()?;
        Ok(self.path)
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Writes the fully resolved configuration next to the outputs.
pub fn write_effective_config(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{command}.config.toml"));
    std::fs::write(&path, cfg.to_toml())?;
    Ok(path)
}
