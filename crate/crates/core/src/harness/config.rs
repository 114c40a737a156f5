//! Flat `key = value` experiment configuration.
//!
//! ```text
//! schema_version = 1
//! name = fig1-desk
//! ensemble = gaussian
//! n = 4096
//! k = 2048
//! noise_var = 0.01
//! likelihood = probit
//! horizon = 20
//! seeds = 1,2,3,4,5
//! ```
//!
//! Lines starting with `#` are comments. Unknown keys are rejected so that
//! typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::ensemble::DesignKind;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodKind;
use crate::quadrature::{QuadratureScheme, QuadratureSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest horizon of the two-time theory.
pub const MAX_HORIZON: usize = 64;

/// Parses `key = value` lines into a map. Duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Largest acceptable `rse(t, s)` (median over seeds).
    pub rse_max: f64,
    /// Largest `rse` index compared, `1 ≤ t, s ≤ rse_window`.
    pub rse_window: usize,
    /// Relative gap allowed between the fitted log-slope and `ln μ_ρ`.
    pub rate_rel: f64,
    /// Largest acceptable TAP residual of a converged run.
    pub tap: f64,
    /// Largest RMS gap between the two algorithms' fixed points.
    pub equivalence: f64,
    /// Largest Monte Carlo z-score against the theory covariances.
    pub mc_z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rse_max: 1e-2,
            rse_window: 8,
            rate_rel: 0.1,
            tap: 1e-7,
            equivalence: 1e-6,
            mc_z: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub ensemble: DesignKind,
    pub n: usize,
    pub k: usize,
    pub noise_var: f64,
    pub likelihood: LikelihoodKind,
    /// Horizon of the covariance comparison and of the theory recursion.
    pub horizon: usize,
    /// Iterations of the simulated runs; the rate fit and the fixed-point
    /// checks use the full run, so this is usually longer than `horizon`.
    pub run_steps: usize,
    pub seeds: Vec<u64>,
    pub quad_nodes: usize,
    pub quad_scheme: QuadratureScheme,
    pub damping: f64,
    pub replica_tol: f64,
    pub replica_max_iter: usize,
    pub dense_cap: usize,
    /// Skips the VAMP run when false.
    pub vamp: bool,
    /// Monte Carlo samples of the single-node oracle; zero disables it.
    pub mc_samples: usize,
    /// Horizon of the Monte Carlo comparison.
    pub mc_horizon: usize,
    /// First step of the rate-fit window.
    pub fit_start: usize,
    pub tolerances: Tolerances,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        preset("fig1-desk").expect("built-in preset")
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 2] = ["fig1-desk", "fig2-desk"];

/// Built-in scenarios. Both use `N = 2K`, `σ₀² = 10⁻²` and a probit teacher.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (ensemble, n, k) = match name {
        "fig1-desk" => (DesignKind::Gaussian, 4096, 2048),
        "fig2-desk" => (DesignKind::Hadamard, 1 << 12, 1 << 11),
        other => return Err(Error::Parse(format!("unknown preset '{other}'"))),
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        ensemble,
        n,
        k,
        noise_var: 1e-2,
        likelihood: LikelihoodKind::Probit,
        horizon: 20,
        run_steps: 200,
        seeds: vec![1, 2, 3, 4, 5],
        quad_nodes: 61,
        quad_scheme: QuadratureScheme::default(),
        damping: 0.5,
        replica_tol: 1e-12,
        replica_max_iter: 10_000,
        dense_cap: crate::spectral::DEFAULT_DENSE_CAP,
        vamp: true,
        mc_samples: 1_000_000,
        mc_horizon: 6,
        fit_start: 2,
        tolerances: Tolerances::default(),
        out_dir: PathBuf::from("out").join(name),
    })
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.k == 0 || self.n < self.k {
            return bad(format!("need n >= k >= 1, got n = {}, k = {}", self.n, self.k));
        }
        if self.ensemble == DesignKind::Hadamard && !self.n.is_power_of_two() {
            return bad(format!("hadamard ensemble needs n a power of two, got {}", self.n));
        }
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return bad(format!("horizon must be in 1..={MAX_HORIZON}, got {}", self.horizon));
        }
        if self.run_steps < self.horizon {
            return bad(format!("run_steps ({}) shorter than horizon ({})", self.run_steps, self.horizon));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return bad(format!("noise_var = {}", self.noise_var));
        }
        if self.mc_horizon > self.horizon {
            return bad("mc_horizon exceeds horizon".into());
        }
        if self.fit_start == 0 {
            return bad("fit_start must be at least 1".into());
        }
        self.quadrature()?;
        Ok(())
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec> {
        QuadratureSpec::with_scheme(self.quad_scheme, self.quad_nodes)
    }

    pub fn to_kv(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let t = &self.tolerances;
        format!(
            "schema_version = {SCHEMA_VERSION}\n\
             name = {}\n\
             ensemble = {}\n\
             n = {}\n\
             k = {}\n\
             noise_var = {}\n\
             likelihood = {}\n\
             horizon = {}\n\
             run_steps = {}\n\
             seeds = {}\n\
             quad_nodes = {}\n\
             quad_scheme = {}\n\
             damping = {}\n\
             replica_tol = {}\n\
             replica_max_iter = {}\n\
             dense_cap = {}\n\
             vamp = {}\n\
             mc_samples = {}\n\
             mc_horizon = {}\n\
             fit_start = {}\n\
             tol.rse_max = {}\n\
             tol.rse_window = {}\n\
             tol.rate_rel = {}\n\
             tol.tap = {}\n\
             tol.equivalence = {}\n\
             tol.mc_z = {}\n\
             out_dir = {}\n",
            self.name,
            self.ensemble.as_str(),
            self.n,
            self.k,
            self.noise_var,
            self.likelihood.as_str(),
            self.horizon,
            self.run_steps,
            seeds.join(","),
            self.quad_nodes,
            self.quad_scheme.as_str(),
            self.damping,
            self.replica_tol,
            self.replica_max_iter,
            self.dense_cap,
            self.vamp,
            self.mc_samples,
            self.mc_horizon,
            self.fit_start,
            t.rse_max,
            t.rse_window,
            t.rate_rel,
            t.tap,
            t.equivalence,
            t.mc_z,
            self.out_dir.display(),
        )
    }

    /// Parses a configuration. Keys absent from the text keep the values of
    /// `preset` if one is named, otherwise of `fig1-desk`.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = parse_kv(text)?;
        match map.remove("schema_version") {
            Some(v) if v == SCHEMA_VERSION.to_string() => {}
            Some(v) => return Err(Error::Parse(format!("unsupported schema_version {v}"))),
            None => return Err(Error::Parse("missing schema_version".into())),
        }
        let mut cfg = match map.remove("preset") {
            Some(p) => preset(&p)?,
            None => ExperimentConfig::default(),
        };
        for (key, value) in map {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }

    /// Overrides one field by key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse(format!("{key}: cannot parse '{v}'")))
        }
        match key {
            "name" => self.name = value.to_string(),
            "ensemble" => self.ensemble = value.parse()?,
            "n" => self.n = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "noise_var" => self.noise_var = num(key, value)?,
            "likelihood" => self.likelihood = value.parse()?,
            "horizon" => self.horizon = num(key, value)?,
            "run_steps" => self.run_steps = num(key, value)?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| num::<u64>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "quad_nodes" => self.quad_nodes = num(key, value)?,
            "quad_scheme" => self.quad_scheme = value.parse()?,
            "damping" => self.damping = num(key, value)?,
            "replica_tol" => self.replica_tol = num(key, value)?,
            "replica_max_iter" => self.replica_max_iter = num(key, value)?,
            "dense_cap" => self.dense_cap = num(key, value)?,
            "vamp" => self.vamp = num(key, value)?,
            "mc_samples" => self.mc_samples = num(key, value)?,
            "mc_horizon" => self.mc_horizon = num(key, value)?,
            "fit_start" => self.fit_start = num(key, value)?,
            "tol.rse_max" => self.tolerances.rse_max = num(key, value)?,
            "tol.rse_window" => self.tolerances.rse_window = num(key, value)?,
            "tol.rate_rel" => self.tolerances.rate_rel = num(key, value)?,
            "tol.tap" => self.tolerances.tap = num(key, value)?,
            "tol.equivalence" => self.tolerances.equivalence = num(key, value)?,
            "tol.mc_z" => self.tolerances.mc_z = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Parse(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}
