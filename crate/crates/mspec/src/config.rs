//! Run configuration read from JSON.
//!
//! Every section rejects unknown keys, and [`RunConfig::validate`] checks the
//! values before any simulation starts. The layout is published as
//! `config.schema.json` (printed by `mspec schema`).

use std::path::{Path, PathBuf};

use mspec_core::benchmarks::{GenerativeModel, MisspecConfig, ModelFamily};
use mspec_core::mmd::{KernelFamily, KernelSpec};
use mspec_core::networks::{FlowConfig, Pooling, SummaryConfig};
use mspec_core::training::{LrSchedule, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = include_str!("../config.schema.json");
pub const SEED_ENV: &str = "MSPEC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub misspec: MisspecConfig,
}

impl ModelSpec {
    pub fn build(&self) -> CliResult<GenerativeModel> {
        Ok(GenerativeModel::new(ModelFamily::from_name(&self.name)?, self.misspec.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub summary_dim: usize,
    pub equivariant_widths: Vec<usize>,
    pub pooling: Pooling,
    pub invariant_widths: Vec<usize>,
    pub flow_layers: Option<usize>,
    pub flow_hidden_widths: Vec<usize>,
    pub clamp: Option<f64>,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        Self {
            summary_dim: 4,
            equivariant_widths: vec![64, 64],
            pooling: Pooling::MeanMax,
            invariant_widths: vec![64, 64],
            flow_layers: None,
            flow_hidden_widths: vec![64, 64],
            clamp: None,
        }
    }
}

impl NetworkSettings {
    pub fn summary_config(&self, obs_dim: usize) -> SummaryConfig {
        SummaryConfig {
            input_dim: obs_dim,
            equivariant_widths: self.equivariant_widths.clone(),
            pooling: self.pooling,
            invariant_widths: self.invariant_widths.clone(),
            bottleneck_dim: self.summary_dim,
        }
    }

    pub fn flow_config(&self, param_dim: usize) -> FlowConfig {
        let mut cfg = FlowConfig::new(param_dim, self.summary_dim);
        if let Some(n) = self.flow_layers {
            cfg.n_layers = n;
        }
        if let Some(c) = self.clamp {
            cfg.clamp = c;
        }
        cfg.hidden_widths = self.flow_hidden_widths.clone();
        cfg
    }
}

/// Optimizer settings; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub gamma: f64,
    pub batch_size: usize,
    pub n_steps: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub clip_norm: Option<f64>,
    pub k: Option<usize>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            gamma: d.gamma,
            batch_size: d.batch_size,
            n_steps: d.n_steps,
            learning_rate: d.learning_rate,
            schedule: d.schedule,
            clip_norm: d.clip_norm,
            k: d.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSettings {
    /// Validation simulations kept as the reference sample.
    pub validation_m: usize,
    /// Draws of the null distribution.
    pub null_reps: usize,
    /// Observed datasets per test.
    pub n_obs: usize,
    pub alpha: f64,
    pub kernel: KernelFamily,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self { validation_m: 1000, null_reps: 1000, n_obs: 100, alpha: 0.05, kernel: KernelFamily::Gaussian }
    }
}

impl DetectorSettings {
    pub fn kernel_spec(&self, summary_dim: usize) -> KernelSpec {
        match self.kernel {
            KernelFamily::Gaussian => KernelSpec::gaussian_default(summary_dim),
            KernelFamily::Imq => KernelSpec::imq_default(summary_dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub network: NetworkSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("mspec-out")
}

impl RunConfig {
    pub fn new(model: &str) -> Self {
        Self {
            model: ModelSpec { name: model.into(), misspec: MisspecConfig::none() },
            network: NetworkSettings::default(),
            train: TrainSettings::default(),
            detector: DetectorSettings::default(),
            output_dir: default_output(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read, apply the `MSPEC_SEED` override, and validate.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.into(),
            line: e.line() as u64,
            detail: e.to_string(),
        })?;
        if let Some(seed) = seed_override()? {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let model = self.model.build()?;
        self.network.summary_config(model.obs_dim()).validate()?;
        self.network.flow_config(model.param_dim()).validate()?;
        self.train_config().validate()?;
        let d = &self.detector;
        if d.validation_m < 2 || d.n_obs == 0 {
            return Err(CliError::Config("detector needs validation_m >= 2 and n_obs >= 1".into()));
        }
        if d.null_reps < mspec_core::detector::MIN_NULL_DRAWS {
            return Err(CliError::Config(format!(
                "null_reps must be at least {}",
                mspec_core::detector::MIN_NULL_DRAWS
            )));
        }
        if !(d.alpha > 0.0 && d.alpha < 1.0) {
            return Err(CliError::Config("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            gamma: t.gamma,
            batch_size: t.batch_size,
            n_steps: t.n_steps,
            learning_rate: t.learning_rate,
            schedule: t.schedule,
            clip_norm: t.clip_norm,
            seed: self.seed,
            kernel: None,
            k: t.k,
        }
    }
}

/// Seed from `MSPEC_SEED`, if set.
pub fn seed_override() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{} must be an unsigned integer, got {:?}", SEED_ENV, v))),
        Err(_) => Ok(None),
    }
}
