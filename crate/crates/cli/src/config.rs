//! TOML run configuration.

use std::path::{Path, PathBuf};

use nlks_core::spectral::validate_exponents;
use nlks_core::{ContinuationConfig, NewtonConfig};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Invalid or unreadable configuration; the message names the field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field(name: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{name}: {msg}"))
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Both,
    Positive,
    Negative,
}

impl Direction {
    pub fn signs(self) -> &'static [f64] {
        match self {
            Direction::Both => &[1.0, -1.0],
            Direction::Positive => &[1.0],
            Direction::Negative => &[-1.0],
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub k: usize,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default)]
    pub direction: Direction,
}

fn default_t0() -> f64 {
    0.05
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSection {
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub eps_floor: f64,
    pub eps_ceiling: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub instability_fraction: f64,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        let c = ContinuationConfig::default();
        Self {
            ds0: c.ds0,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_steps: c.max_steps,
            eps_floor: c.eps_floor,
            eps_ceiling: c.eps_ceiling,
            newton_tol: 1e-10,
            newton_max_iter: c.newton.max_iter,
            instability_fraction: c.instability_fraction,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub eps: f64,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Leading sine coefficients of the initial state; the rest are zero.
    pub initial: Vec<f64>,
    /// When set, also run a stability probe of `u = 0` at this amplitude.
    #[serde(default)]
    pub probe_amplitude: Option<f64>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_sample_every() -> usize {
    100
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub r: f64,
    pub s: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub branches: Vec<SeedSpec>,
    #[serde(default)]
    pub continuation: ContinuationSection,
    #[serde(default)]
    pub evolution: Vec<EvolutionSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Profile samples written per branch (evenly spaced along it).
    #[serde(default = "default_profiles")]
    pub profiles_per_branch: usize,
}

fn default_modes() -> usize {
    128
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("nlks-out")
}

fn default_profiles() -> usize {
    3
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if !(self.s > 1.0) {
            return Err(field("s", format!("must satisfy s > 1, got {}", self.s)));
        }
        validate_exponents(self.r, self.s).map_err(|e| field("r", e))?;
        if self.modes < 2 {
            return Err(field("modes", "must be at least 2"));
        }
        for (i, b) in self.branches.iter().enumerate() {
            if b.k == 0 {
                return Err(field(&format!("branches[{i}].k"), "must be at least 1"));
            }
            if 2 * b.k > self.modes {
                return Err(field(&format!("branches[{i}].k"), "needs modes >= 2k"));
            }
            if !(b.t0.abs() > 0.0 && b.t0.abs() <= 0.5) {
                return Err(field(&format!("branches[{i}].t0"), "|t0| must lie in (0, 0.5]"));
            }
        }
        self.continuation_config()
            .validate()
            .map_err(|e| field("continuation", e))?;
        for (i, e) in self.evolution.iter().enumerate() {
            let name = |f: &str| format!("evolution[{i}].{f}");
            if !(e.eps > 0.0) {
                return Err(field(&name("eps"), "must be positive"));
            }
            if !(e.t_end > 0.0) {
                return Err(field(&name("t_end"), "must be positive"));
            }
            if !(e.dt > 0.0) {
                return Err(field(&name("dt"), "must be positive"));
            }
            if e.sample_every == 0 {
                return Err(field(&name("sample_every"), "must be at least 1"));
            }
            if e.initial.len() > self.modes || e.initial.iter().any(|a| !a.is_finite()) {
                return Err(field(&name("initial"), "needs at most `modes` finite coefficients"));
            }
            if e.probe_amplitude.is_some_and(|a| !(a >= 0.0)) {
                return Err(field(&name("probe_amplitude"), "must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn continuation_config(&self) -> ContinuationConfig {
        let c = &self.continuation;
        ContinuationConfig {
            ds0: c.ds0,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            newton: NewtonConfig { max_iter: c.newton_max_iter, ..NewtonConfig::with_tol(c.newton_tol) },
            max_steps: c.max_steps,
            eps_floor: c.eps_floor,
            eps_ceiling: c.eps_ceiling,
            modes: self.modes,
            instability_fraction: c.instability_fraction,
        }
    }

    /// `NLKS_OUTPUT_DIR` wins over the configured directory.
    pub fn resolved_output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        override_dir.map_or_else(|| self.output_dir.clone(), Path::to_path_buf)
    }
}
