//! Deterministic result files: every CSV starts with a comment line pinning
//! the effective config hash and seed, so reruns are byte-identical and
//! traceable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use freqbin_core::RunConfig;

use crate::CliResult;

/// Short hash of the effective (post-override) configuration.
pub fn config_hash(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

pub struct CsvWriter {
    inner: BufWriter<File>,
    path: PathBuf,
}

impl CsvWriter {
    pub fn create(dir: &Path, name: &str, config: &RunConfig, header: &str) -> CliResult<Self> {
        let path = dir.join(name);
        let file = File::create(&path)?;
        let mut inner = BufWriter::new(file);
        writeln!(
            inner,
            "# config_hash={} seed={}",
            config_hash(config),
            config.seed
        )?;
        writeln!(inner, "{header}")?;
        Ok(Self { inner, path })
    }

    pub fn row(&mut self, fields: &[String]) -> CliResult<()> {
        writeln!(self.inner, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<PathBuf> {
        self.inner.flush()?;
        Ok(self.path)
    }
}

pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::CliError::Io(format!("serialize {name}: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
