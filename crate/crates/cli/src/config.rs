//! Run configuration: a flat `key = value` file, overridable from flags.

use std::fmt::Write as _;
use std::path::Path;

use fragdiff_core::diffusion::DiffusionSchedule;
use fragdiff_core::igso3::Igso3Params;
use fragdiff_core::sampler::{karras_grid, AnnealSchedule, TimeGrid};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub igso3_sigma_min: f64,
    pub igso3_sigma_max: f64,
    pub igso3_n_sigma: usize,
    pub igso3_n_omega: usize,
    pub igso3_truncation: usize,
    pub n_steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub rho: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub rho_gamma: f64,
    pub scale: f64,
    pub sigma_com: f64,
    pub n_seeds: usize,
    pub seed: u64,
    pub rank_beta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = DiffusionSchedule::default();
        let t = Igso3Params::default();
        let a = AnnealSchedule::default();
        RunConfig {
            beta_min: s.beta_min,
            beta_max: s.beta_max,
            sigma_min: s.sigma_min,
            sigma_max: s.sigma_max,
            igso3_sigma_min: t.sigma_min,
            igso3_sigma_max: t.sigma_max,
            igso3_n_sigma: t.n_sigma,
            igso3_n_omega: t.n_omega,
            igso3_truncation: t.truncation,
            n_steps: 25,
            t_min: 0.002,
            t_max: 1.0,
            rho: 3.0,
            gamma_min: a.gamma_min,
            gamma_max: a.gamma_max,
            rho_gamma: a.rho,
            scale: fragdiff_core::sampler::DEFAULT_SCALE,
            sigma_com: 0.5,
            n_seeds: 10,
            seed: 0,
            rank_beta: 4.0,
        }
    }
}

/// Every accepted key, in the order written by [`RunConfig::to_text`].
pub const KEYS: [&str; 21] = [
    "beta_min",
    "beta_max",
    "sigma_min",
    "sigma_max",
    "igso3_sigma_min",
    "igso3_sigma_max",
    "igso3_n_sigma",
    "igso3_n_omega",
    "igso3_truncation",
    "n_steps",
    "t_min",
    "t_max",
    "rho",
    "gamma_min",
    "gamma_max",
    "rho_gamma",
    "scale",
    "sigma_com",
    "n_seeds",
    "seed",
    "rank_beta",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Input(format!("config key '{key}': cannot parse '{value}'")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "beta_min" => self.beta_min = num(key, v)?,
            "beta_max" => self.beta_max = num(key, v)?,
            "sigma_min" => self.sigma_min = num(key, v)?,
            "sigma_max" => self.sigma_max = num(key, v)?,
            "igso3_sigma_min" => self.igso3_sigma_min = num(key, v)?,
            "igso3_sigma_max" => self.igso3_sigma_max = num(key, v)?,
            "igso3_n_sigma" => self.igso3_n_sigma = num(key, v)?,
            "igso3_n_omega" => self.igso3_n_omega = num(key, v)?,
            "igso3_truncation" => self.igso3_truncation = num(key, v)?,
            "n_steps" => self.n_steps = num(key, v)?,
            "t_min" => self.t_min = num(key, v)?,
            "t_max" => self.t_max = num(key, v)?,
            "rho" => self.rho = num(key, v)?,
            "gamma_min" => self.gamma_min = num(key, v)?,
            "gamma_max" => self.gamma_max = num(key, v)?,
            "rho_gamma" => self.rho_gamma = num(key, v)?,
            "scale" => self.scale = num(key, v)?,
            "sigma_com" => self.sigma_com = num(key, v)?,
            "n_seeds" => self.n_seeds = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "rank_beta" => self.rank_beta = num(key, v)?,
            other => return Err(CliError::Input(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "beta_min" => self.beta_min.to_string(),
            "beta_max" => self.beta_max.to_string(),
            "sigma_min" => self.sigma_min.to_string(),
            "sigma_max" => self.sigma_max.to_string(),
            "igso3_sigma_min" => self.igso3_sigma_min.to_string(),
            "igso3_sigma_max" => self.igso3_sigma_max.to_string(),
            "igso3_n_sigma" => self.igso3_n_sigma.to_string(),
            "igso3_n_omega" => self.igso3_n_omega.to_string(),
            "igso3_truncation" => self.igso3_truncation.to_string(),
            "n_steps" => self.n_steps.to_string(),
            "t_min" => self.t_min.to_string(),
            "t_max" => self.t_max.to_string(),
            "rho" => self.rho.to_string(),
            "gamma_min" => self.gamma_min.to_string(),
            "gamma_max" => self.gamma_max.to_string(),
            "rho_gamma" => self.rho_gamma.to_string(),
            "scale" => self.scale.to_string(),
            "sigma_com" => self.sigma_com.to_string(),
            "n_seeds" => self.n_seeds.to_string(),
            "seed" => self.seed.to_string(),
            "rank_beta" => self.rank_beta.to_string(),
            _ => unreachable!("KEYS and get() list the same names"),
        }
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Input(format!("config line {}: expected key = value", n + 1)));
            };
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Canonical form: every key in [`KEYS`] order, shortest round-trip numbers.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k));
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn schedule(&self) -> DiffusionSchedule {
        DiffusionSchedule {
            beta_min: self.beta_min,
            beta_max: self.beta_max,
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
        }
    }

    pub fn igso3(&self) -> Igso3Params {
        Igso3Params {
            sigma_min: self.igso3_sigma_min,
            sigma_max: self.igso3_sigma_max,
            n_sigma: self.igso3_n_sigma,
            n_omega: self.igso3_n_omega,
            truncation: self.igso3_truncation,
        }
    }

    pub fn anneal(&self) -> AnnealSchedule {
        AnnealSchedule { gamma_min: self.gamma_min, gamma_max: self.gamma_max, rho: self.rho_gamma }
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        karras_grid(self.n_steps, self.t_min, self.t_max, self.rho).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: fragdiff_core::Error| CliError::Input(format!("invalid configuration: {e}"));
        self.schedule().validate().map_err(bad)?;
        self.igso3().validate().map_err(bad)?;
        self.anneal().validate().map_err(bad)?;
        self.grid()?;
        if !(self.sigma_max <= self.igso3_sigma_max && self.sigma_min >= self.igso3_sigma_min) {
            return Err(CliError::Input(
                "invalid configuration: [sigma_min, sigma_max] must lie inside the IGSO(3) table range".into(),
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(CliError::Input("invalid configuration: scale must be positive".into()));
        }
        if !(self.sigma_com >= 0.0 && self.sigma_com.is_finite()) {
            return Err(CliError::Input("invalid configuration: sigma_com must be non-negative".into()));
        }
        if self.n_seeds == 0 {
            return Err(CliError::Input("invalid configuration: n_seeds must be at least 1".into()));
        }
        if !(self.rank_beta >= 0.0 && self.rank_beta.is_finite()) {
            return Err(CliError::Input("invalid configuration: rank_beta must be non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_roundtrips() {
        let mut c = RunConfig::default();
        c.set("sigma_max", "2.25").unwrap();
        c.set("seed", "18446744073709551615").unwrap();
        c.set("t_min", "0.0015").unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
    }

    #[test]
    fn comments_blank_lines_and_unknown_keys() {
        let c = RunConfig::parse("# header\n\n n_seeds = 3  # inline\n").unwrap();
        assert_eq!(c.n_seeds, 3);
        assert!(matches!(RunConfig::parse("n_seed = 3"), Err(CliError::Input(_))));
        assert!(matches!(RunConfig::parse("n_seeds 3"), Err(CliError::Input(_))));
        assert!(matches!(RunConfig::parse("n_seeds = three"), Err(CliError::Input(_))));
    }

    #[test]
    fn defaults_are_valid_and_bad_values_are_rejected() {
        RunConfig::default().validate().unwrap();
        for (k, v) in [("scale", "0"), ("n_seeds", "0"), ("t_min", "2"), ("sigma_max", "50"), ("gamma_min", "-1")] {
            let mut c = RunConfig::default();
            c.set(k, v).unwrap();
            assert!(c.validate().is_err(), "{k} = {v}");
        }
    }
}
