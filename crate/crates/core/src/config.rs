//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [population]
//! seed = 7
//! num_clients = 125
//! min_points = 1
//! max_points = 316
//! shape = 1.5
//! concentration = 0.3
//! feature_dim = 16
//! num_classes = 10
//! class_separation = 3.0
//!
//! [split]
//! test_fraction = 0.2
//!
//! [model]
//! kind = "mlp"
//! hidden = 32
//!
//! [training]
//! batch_size = 100
//! lr = 0.007
//! momentum = 0.0
//!
//! [aggregator]
//! kind = "fedavg"
//!
//! [run]
//! mode = "fedtune"
//! target_accuracy = 0.7
//! seeds = [1, 2, 3]
//!
//! [initial]
//! m = 20
//! e = 20
//!
//! [tuner]
//! preference = [0.25, 0.25, 0.25, 0.25]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::CostConstants;
use crate::engine::{AggregatorConfig, HyperParams};
use crate::error::{Error, Result};
use crate::model::{descriptor, preset_descriptor, Architecture, LocalTrainConfig};
use crate::population::PopulationSpec;
use crate::tuner::{Preference, TunerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Constant `M` and `E` for the whole run.
    Fixed,
    /// `M` and `E` adjusted online by the tuner.
    #[value(name = "fedtune")]
    FedTune,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Defaults to the population seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Where the cost constants come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CostSource {
    Preset { preset: String },
    Explicit(CostConstants),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub target_accuracy: f64,
    #[serde(default = "default_round_cap")]
    pub round_cap: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_round_cap() -> usize {
    2000
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("flsim-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub population: PopulationSpec,
    pub split: SplitConfig,
    pub model: Architecture,
    pub training: LocalTrainConfig,
    pub aggregator: AggregatorConfig,
    /// Model descriptor of `model` when absent.
    #[serde(default)]
    pub cost: Option<CostSource>,
    pub run: RunConfig,
    pub initial: HyperParams,
    /// Required in fedtune mode, ignored otherwise.
    #[serde(default)]
    pub tuner: Option<TunerConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            reason: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            reason: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn cost_constants(&self) -> Result<CostConstants> {
        let c = match &self.cost {
            None => CostConstants::from_descriptor(&descriptor(
                self.model,
                self.population.feature_dim,
                self.population.num_classes,
            )?),
            Some(CostSource::Preset { preset }) => CostConstants::from_descriptor(&preset_descriptor(preset)?),
            Some(CostSource::Explicit(c)) => *c,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn tuner_config(&self) -> Result<TunerConfig> {
        self.tuner
            .ok_or_else(|| Error::config("tuner", "fedtune mode needs a [tuner] section"))
    }

    /// Checks everything that can be checked before generating data.
    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.training.validate()?;
        self.cost_constants()?;
        self.aggregator.init(0)?;
        if !(self.run.target_accuracy.is_finite() && (0.0..=1.0).contains(&self.run.target_accuracy)) {
            return Err(Error::config("run.target_accuracy", "must lie in [0, 1]"));
        }
        if self.run.round_cap == 0 {
            return Err(Error::config("run.round_cap", "must be at least 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "needs at least one seed"));
        }
        if self.initial.participants == 0 {
            return Err(Error::config("initial.m", "must be at least 1"));
        }
        if !(self.initial.passes.is_finite() && self.initial.passes > 0.0) {
            return Err(Error::config("initial.e", "must be > 0"));
        }
        if self.run.mode == Mode::FedTune {
            self.tuner_config()?.validate()?;
        }
        Ok(())
    }

    pub fn with_preference(&self, preference: Preference) -> Self {
        let mut cfg = self.clone();
        let tuner = cfg.tuner.unwrap_or_else(|| TunerConfig::new(preference));
        cfg.tuner = Some(TunerConfig { preference, ..tuner });
        cfg
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        let mut cfg = self.clone();
        cfg.run.mode = mode;
        cfg
    }

    pub fn with_initial(&self, initial: HyperParams) -> Self {
        let mut cfg = self.clone();
        cfg.initial = initial;
        cfg
    }

    /// The desk-scale reference task: 100 training clients with power-law
    /// counts, 16 features, 10 classes, a one-hidden-layer model and a 0.7
    /// accuracy target, starting from `M = E = 20`.
    pub fn reference() -> Self {
        Self::from_toml(REFERENCE_TOML).expect("reference config parses")
    }
}

/// Source of [`ExperimentConfig::reference`]; also shipped as
/// `configs/reference.toml`.
pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");
