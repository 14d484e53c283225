//! File access and output stamping.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use fragdiff_core::molio::{parse_sdf, Envelope, MolecularGraph, Pocket};
use fragdiff_core::Vec3;
use serde::Serialize;
use serde::de::DeserializeOwned;

use crate::config::RunConfig;
use crate::error::CliError;

/// Environment variable naming a directory for cached IGSO(3) tables.
pub const CACHE_ENV: &str = "FRAGDIFF_IGSO3_CACHE";

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn in_file(path: &Path, e: fragdiff_core::Error) -> CliError {
    CliError::Input(format!("{}: {}: {e}", path.display(), e.name()))
}

/// Ligand with conformer coordinates.
pub fn read_ligand(path: &Path) -> Result<(MolecularGraph, Vec<Vec3>), CliError> {
    let g = parse_sdf(&read_text(path)?).map_err(|e| in_file(path, e))?;
    let x = g.coordinates().map_err(|e| in_file(path, e))?;
    Ok((g, x))
}

pub fn read_pocket(path: &Path) -> Result<Vec<Vec3>, CliError> {
    let p = Pocket::from_json(&read_text(path)?).map_err(|e| in_file(path, e))?;
    if p.atoms.is_empty() {
        return Err(CliError::Input(format!("{}: pocket has no atoms", path.display())));
    }
    Ok(p.positions())
}

pub fn read_envelope<T: Serialize + DeserializeOwned>(path: &Path, kind: &str) -> Result<Envelope<T>, CliError> {
    Envelope::from_json(&read_text(path)?, kind).map_err(|e| in_file(path, e))
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Provenance attached to every output: tool version, config hash, master seed.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub version: &'static str,
    pub config_hash: String,
    pub master_seed: u64,
    pub config_text: String,
}

impl Stamp {
    pub fn new(cfg: &RunConfig) -> Self {
        Stamp {
            version: env!("CARGO_PKG_VERSION"),
            config_hash: cfg.hash(),
            master_seed: cfg.seed,
            config_text: cfg.to_text(),
        }
    }

    pub fn envelope<T: Serialize + DeserializeOwned>(&self, kind: &str, data: T) -> Envelope<T> {
        let mut env = Envelope::new(kind, data);
        let m = &mut env.metadata;
        m.insert("version".into(), self.version.into());
        m.insert("config_hash".into(), self.config_hash.clone().into());
        m.insert("master_seed".into(), self.master_seed.into());
        m.insert("config".into(), self.config_text.clone().into());
        env
    }

    pub fn json<T: Serialize + DeserializeOwned>(&self, kind: &str, data: T) -> Result<String, CliError> {
        let mut s = self.envelope(kind, data).to_json()?;
        s.push('\n');
        Ok(s)
    }

    fn line(&self) -> String {
        format!("fragdiff {} config_hash={} seed={}", self.version, self.config_hash, self.master_seed)
    }

    /// CSV text preceded by a `#` provenance line.
    pub fn csv(&self, header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Input(format!("csv: {e}"));
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.write_record(r).map_err(fail)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Input(format!("csv: {e}")))?;
        Ok(format!("# {}\n{}", self.line(), String::from_utf8_lossy(&body)))
    }

    /// Replaces the comment line (third header line) of every SDF record.
    pub fn sdf(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len() + 64);
        let mut line_in_record = 0;
        for line in text.lines() {
            if line_in_record == 2 {
                out.push_str(&self.line());
            } else {
                out.push_str(line);
            }
            out.push('\n');
            line_in_record = if line == "$$$$" { 0 } else { line_in_record + 1 };
        }
        out
    }
}
