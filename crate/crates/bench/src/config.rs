//! Flat key-value run configuration.
//!
//! Keys mirror the `run` flags. Values given on the command line win over
//! the file; the output directory falls back to `RAOL_OUT`, then `results`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use raol_core::LearningMode;

use crate::error::{BenchError, Result};
use crate::harness::{ExperimentConfig, SampleSpec};

pub const OUT_ENV: &str = "RAOL_OUT";
pub const DEFAULT_OUT: &str = "results";

/// Every field is optional so a file and the command line can be layered.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    pub scenario: Option<String>,
    pub mode: Option<String>,
    pub runs: Option<usize>,
    pub seed_base: Option<u64>,
    pub nt: Option<String>,
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub eta: Option<f64>,
    pub eta_scale: Option<f64>,
    pub delta: Option<f64>,
    pub x1: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunOptions {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(toml::from_str(&text)?)
    }

    /// Fields of `self` take precedence over `base`.
    pub fn over(self, base: Self) -> Self {
        Self {
            scenario: self.scenario.or(base.scenario),
            mode: self.mode.or(base.mode),
            runs: self.runs.or(base.runs),
            seed_base: self.seed_base.or(base.seed_base),
            nt: self.nt.or(base.nt),
            a: self.a.or(base.a),
            c: self.c.or(base.c),
            eta: self.eta.or(base.eta),
            eta_scale: self.eta_scale.or(base.eta_scale),
            delta: self.delta.or(base.delta),
            x1: self.x1.or(base.x1),
            out: self.out.or(base.out),
        }
    }

    /// Resolves into an experiment; `env_out` is the environment's default
    /// output directory, if any.
    pub fn into_config(self, env_out: Option<PathBuf>) -> Result<ExperimentConfig> {
        let scenario = self
            .scenario
            .ok_or_else(|| BenchError::Config("no scenario given".into()))?;
        let mut cfg = ExperimentConfig::new(&scenario);
        if let Some(mode) = self.mode {
            cfg.modes = parse_modes(&mode)?;
        }
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        if let Some(seed) = self.seed_base {
            cfg.seed_base = seed;
        }
        if let Some(nt) = self.nt {
            cfg.samples = Some(nt.parse()?);
        }
        cfg.a = self.a;
        if let Some(c) = self.c {
            cfg.c = c;
        }
        cfg.eta = self.eta;
        cfg.eta_scale = self.eta_scale;
        cfg.delta = self.delta;
        if let Some(x1) = self.x1 {
            cfg.x1 = x1;
        }
        cfg.out = Some(
            self.out
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        );
        if matches!(cfg.samples, Some(SampleSpec::Auto)) && cfg.a.is_none() {
            return Err(BenchError::Config(
                "`nt = auto` needs a budget exponent `a`".into(),
            ));
        }
        Ok(cfg)
    }
}

pub fn parse_modes(s: &str) -> Result<Vec<LearningMode>> {
    match s {
        "first" => Ok(vec![LearningMode::FirstOrder]),
        "zeroth" => Ok(vec![LearningMode::ZerothOrder]),
        "both" => Ok(vec![LearningMode::FirstOrder, LearningMode::ZerothOrder]),
        other => Err(BenchError::Config(format!(
            "mode must be first, zeroth or both, got `{other}`"
        ))),
    }
}
