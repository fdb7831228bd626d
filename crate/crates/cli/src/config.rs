//! Experiment configuration: one TOML document per experiment, validated
//! with explicit field paths.

use serde::{Deserialize, Serialize};
use smd_core::{NoiseModel, Regularizer, StepSchedule, StochasticProblem};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    Run,
    CertifyVc,
    CertifyLvc,
    Sharpness,
    Flow,
    Apt,
    FiniteHit,
}

impl JobKind {
    pub fn is_certification(self) -> bool {
        matches!(self, JobKind::CertifyVc | JobKind::CertifyLvc | JobKind::Sharpness)
    }

    pub fn is_flow(self) -> bool {
        matches!(self, JobKind::Flow | JobKind::Apt)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub base_alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub offset: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseConfig {
    None,
    Gaussian { sigma: f64 },
    Uniform { halfwidth: f64 },
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::None
    }
}

impl NoiseConfig {
    pub fn to_model(&self) -> NoiseModel {
        match *self {
            NoiseConfig::None => NoiseModel::None,
            NoiseConfig::Gaussian { sigma } => NoiseModel::GaussianAdditive { sigma },
            NoiseConfig::Uniform { halfwidth } => NoiseModel::UniformAdditive { halfwidth },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Radius of the hitting ball around the minimizer set.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Coupling-zone threshold; zone hits are only counted when set.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Required all-equal tail length for the finite-hit detector.
    #[serde(default = "default_tail_window")]
    pub tail_window: u64,
}

fn default_eps() -> f64 {
    0.05
}

fn default_tail_window() -> u64 {
    1_000
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            delta: None,
            tail_window: default_tail_window(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LvcConfig {
    pub candidate: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct CertifyConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SharpnessConfig {
    /// Defaults to the problem's first stored minimizer.
    #[serde(default)]
    pub candidate: Option<Vec<f64>>,
    #[serde(default = "default_directions")]
    pub directions: usize,
}

fn default_directions() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    pub t_max: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AptConfig {
    pub t_list: Vec<f64>,
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    smd_core::dynamics::DEFAULT_DT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub regularizer: String,
    pub jobs: Vec<JobKind>,
    pub seeds: Vec<u64>,
    pub n_iters: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub lvc: Option<LvcConfig>,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub sharpness: SharpnessConfig,
    #[serde(default)]
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub apt: Option<AptConfig>,
}

fn default_record_every() -> u64 {
    1
}

fn default_out_dir() -> String {
    "out".to_string()
}

/// A configuration problem, reported with the path of the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("<file>", format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| err("<toml>", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Semantic checks beyond what the TOML schema enforces.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let problem = self.resolve_problem()?;
        let h = self.resolve_regularizer()?;
        if !h.supports(problem.region()) {
            return Err(err(
                "regularizer",
                format!(
                    "`{}` does not pair with the region of problem `{}`",
                    self.regularizer, self.problem
                ),
            ));
        }

        let schedule = StepSchedule {
            base_alpha: self.schedule.base_alpha,
            exponent_beta: self.schedule.beta,
            offset: self.schedule.offset,
        };
        let report = schedule.validate();
        if !report.valid {
            return Err(err("schedule", report.reasons.join("; ")));
        }

        if self.seeds.is_empty() {
            return Err(err("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(err("seeds", "seeds must be distinct"));
        }

        if self.jobs.is_empty() {
            return Err(err("jobs", "at least one job is required"));
        }
        if self.record_every == 0 {
            return Err(err("record_every", "must be >= 1"));
        }
        if let Some(y0) = &self.y0 {
            if y0.len() != problem.dim() {
                return Err(err(
                    "y0",
                    format!("expected dimension {}, got {}", problem.dim(), y0.len()),
                ));
            }
        }
        if !(self.diagnostics.eps > 0.0) {
            return Err(err("diagnostics.eps", "must be positive"));
        }
        if let Some(delta) = self.diagnostics.delta {
            if !(delta > 0.0) {
                return Err(err("diagnostics.delta", "must be positive"));
            }
        }

        if self.jobs.contains(&JobKind::CertifyLvc) {
            let lvc = self
                .lvc
                .as_ref()
                .ok_or_else(|| err("lvc", "section required by the certify-lvc job"))?;
            if lvc.candidate.len() != problem.dim() {
                return Err(err("lvc.candidate", "dimension mismatch with the problem"));
            }
            if !problem.region().contains(&lvc.candidate) {
                return Err(err("lvc.candidate", "candidate is infeasible"));
            }
            if !(lvc.radius > 0.0) {
                return Err(err("lvc.radius", "must be positive"));
            }
        }
        if let Some(candidate) = &self.sharpness.candidate {
            if candidate.len() != problem.dim() {
                return Err(err("sharpness.candidate", "dimension mismatch"));
            }
        }
        if self.jobs.contains(&JobKind::Flow) {
            let flow = self
                .flow
                .as_ref()
                .ok_or_else(|| err("flow", "section required by the flow job"))?;
            if !(flow.t_max > 0.0) || !(flow.dt > 0.0) {
                return Err(err("flow.t_max", "t_max and dt must be positive"));
            }
            if let Some(y0) = &flow.y0 {
                if y0.len() != problem.dim() {
                    return Err(err("flow.y0", "dimension mismatch"));
                }
            }
        }
        if self.jobs.contains(&JobKind::Apt) {
            let apt = self
                .apt
                .as_ref()
                .ok_or_else(|| err("apt", "section required by the apt job"))?;
            if apt.t_list.is_empty() {
                return Err(err("apt.t_list", "at least one start time is required"));
            }
            if !(apt.horizon > 0.0) || !(apt.dt > 0.0) {
                return Err(err("apt.horizon", "horizon and dt must be positive"));
            }
        }
        Ok(())
    }

    pub fn resolve_problem(&self) -> Result<StochasticProblem, ConfigError> {
        smd_core::registry::lookup(&self.problem)
            .map(|p| p.with_noise(self.noise.to_model()))
            .map_err(|e| err("problem", e.to_string()))
    }

    pub fn resolve_regularizer(&self) -> Result<Regularizer, ConfigError> {
        Regularizer::from_str(&self.regularizer).map_err(|e| err("regularizer", e.to_string()))
    }

    pub fn resolve_schedule(&self) -> StepSchedule {
        StepSchedule {
            base_alpha: self.schedule.base_alpha,
            exponent_beta: self.schedule.beta,
            offset: self.schedule.offset,
        }
    }
}
