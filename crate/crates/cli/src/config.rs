//! Experiment configuration, schema version 1.

use std::path::{Path, PathBuf};

use qmpe_core::model::{BathSpec, ProbeSpec, SpectralDensity};
use qmpe_core::mpemba::TimeGrid;
use qmpe_core::thermometry::{ProbeState, StateLabel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// Explicit per-level detunings; the linear ramp is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detunings: Option<Vec<f64>>,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_density")]
    pub spectral_density: SpectralDensity,
}

fn default_gap() -> f64 {
    1.0
}

fn default_density() -> SpectralDensity {
    SpectralDensity::Flat
}

impl Default for ModelConfig {
    /// d = 10, unit gap, eps = 0.05, beta = 1, gamma = 1, flat coupling.
    fn default() -> Self {
        Self {
            d: 10,
            gap: 1.0,
            epsilon: 0.05,
            detunings: None,
            beta: 1.0,
            gamma: 1.0,
            spectral_density: SpectralDensity::Flat,
        }
    }
}

impl ModelConfig {
    pub fn probe(&self) -> CliResult<ProbeSpec> {
        let p = match &self.detunings {
            Some(det) => ProbeSpec::with_detunings(self.d, self.gap, self.epsilon, det.clone()),
            None if self.epsilon == 0.0 => ProbeSpec::degenerate(self.d, self.gap),
            None => ProbeSpec::ramp(self.d, self.gap, self.epsilon),
        };
        p.map_err(|e| config_error("model", e))
    }

    pub fn bath(&self) -> CliResult<BathSpec> {
        BathSpec::new(self.beta, self.gamma, self.spectral_density.clone()).map_err(|e| config_error("model", e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Log,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
    /// Points after `t = 0`.
    #[serde(default = "default_points")]
    pub n_points: usize,
}

fn default_spacing() -> Spacing {
    Spacing::Log
}

fn default_points() -> usize {
    200
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { spacing: Spacing::Log, n_points: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Ground,
    ExcitedUniform,
    Uniform,
    Basis { level: usize },
    Haar { index: u64 },
    Mixed { index: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Evolution interval for the finite-time signal.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Temperature step; `1e-4 beta` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbeta: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Sample or instance count; each command has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    /// Evolution horizon; `10 / lambda_min` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_width: Option<usize>,
    #[serde(default = "default_curves")]
    pub n_random_curves: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_initial")]
    pub initial_state: InitialState,
    /// Block dimensions for the trace-norm inequality runs.
    #[serde(default = "default_lemma_dims")]
    pub lemma_dims: Vec<usize>,
}

fn default_dt() -> f64 {
    0.1
}

fn default_alpha() -> f64 {
    0.2
}

fn default_curves() -> usize {
    20
}

fn default_initial() -> InitialState {
    InitialState::Ground
}

fn default_lemma_dims() -> Vec<usize> {
    (2..=8).collect()
}

fn config_error(path: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config { path: path.to_string(), message: e.to_string() }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.into_inner().to_string();
            // serde reports a missing key at its parent
            if let Some(key) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                path = if path == "." { key.to_string() } else { format!("{path}.{key}") };
            }
            CliError::Config { path, message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that need no numerics; model parameters are checked when the model is built.
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error("schema_version", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version)));
        }
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(config_error("dt", "must be finite and non-negative"));
        }
        if let Some(h) = self.dbeta {
            if !(h.is_finite() && h > 0.0) {
                return Err(config_error("dbeta", "must be positive"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config_error("alpha", "must lie in (0, 1]"));
        }
        if self.n_samples == Some(0) {
            return Err(config_error("n_samples", "must be at least 1"));
        }
        if let Some(t) = self.t_max {
            if !(t.is_finite() && t > 0.0) {
                return Err(config_error("t_max", "must be positive"));
            }
        }
        if self.parallel_width == Some(0) {
            return Err(config_error("parallel_width", "must be at least 1"));
        }
        if self.grid.n_points < 2 {
            return Err(config_error("grid.n_points", "must be at least 2"));
        }
        if self.lemma_dims.is_empty() || self.lemma_dims.contains(&0) {
            return Err(config_error("lemma_dims", "must be a non-empty list of positive dimensions"));
        }
        self.model.probe()?;
        self.model.bath()?;
        Ok(())
    }

    pub fn parallel_width(&self) -> usize {
        self.parallel_width
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Time grid on `[0, t_max]`, with `t_max` defaulting to `10 / lambda_min`.
    pub fn time_grid(&self, lambda_min: f64) -> CliResult<TimeGrid> {
        let t_max = self.t_max.unwrap_or(10.0 / lambda_min);
        let n = self.grid.n_points;
        let g = match self.grid.spacing {
            Spacing::Log => TimeGrid::log_spaced(t_max * 1e-4, t_max, n),
            Spacing::Uniform => TimeGrid::uniform(t_max, n + 1),
        };
        g.map_err(|e| config_error("grid", e))
    }

    pub fn initial_state(&self) -> CliResult<ProbeState> {
        let d = self.model.d;
        Ok(match &self.initial_state {
            InitialState::Ground => ProbeState::ground(d),
            InitialState::ExcitedUniform => ProbeState::excited_uniform(d),
            InitialState::Uniform => ProbeState::uniform_superposition(d),
            InitialState::Basis { level } => {
                if *level >= d {
                    return Err(config_error("initial_state.level", format!("level {level} out of range for d = {d}")));
                }
                ProbeState::basis(d, *level)
            }
            InitialState::Haar { index } => ProbeState::haar(d, self.seed, *index),
            InitialState::Mixed { index } => {
                let l = qmpe_core::model::build_liouvillian(&self.model.probe()?, &self.model.bath()?)?;
                mixed_reference(&l.gibbs, d, self.alpha, self.seed, *index)?
            }
        })
    }
}

/// `(1 - alpha) tau + alpha |s><s|` with `s` the Haar state of stream `(seed, index)`.
pub fn mixed_reference(tau: &qmpe_core::CMatrix, d: usize, alpha: f64, seed: u64, index: u64) -> CliResult<ProbeState> {
    let s = qmpe_core::montecarlo::haar_pure_state(d, seed, index);
    let rho = &tau.scale_real(1.0 - alpha) + &s.projector().scale_real(alpha);
    Ok(ProbeState::new(rho.hermitian_part(), StateLabel::Mixed { alpha, seed, index })?)
}
