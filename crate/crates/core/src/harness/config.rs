use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{AeConfig, SvddConfig};
use crate::nn::{Activation, OptimizerConfig};
use crate::stopper::{StopMode, StopperConfig, TrainConfig};
use crate::synth::SuiteConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ae(AeConfig<f64>),
    Svdd(SvddConfig<f64>),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ae(_) => "ae",
            ModelSpec::Svdd(_) => "svdd",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelSpec::Ae(c) => c.input_dim,
            ModelSpec::Svdd(c) => c.dims[0],
        }
    }

    /// Same architecture family, resized for `d` inputs.
    pub fn with_input_dim(&self, d: usize) -> Self {
        match self {
            ModelSpec::Ae(c) => ModelSpec::Ae(AeConfig { input_dim: d, ..*c }),
            ModelSpec::Svdd(c) => {
                let mut c = c.clone();
                c.dims[0] = d;
                ModelSpec::Svdd(c)
            }
        }
    }
}

/// Where a run's data comes from, for configs that name their data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        /// Remove label-1 rows after loading.
        #[serde(default)]
        drop_label_1: bool,
        #[serde(default = "yes")]
        standardize: bool,
    },
    /// Dataset `index` of the generated suite, in suite order.
    Synthetic { suite: SuiteConfig, index: usize },
}

fn yes() -> bool {
    true
}

/// Everything that determines a run except the selection mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub optimizer: OptimizerConfig<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub stopper: StopperConfig<f64>,
    pub n_eval: usize,
    pub seed: u64,
    /// Record entropy in naive and optimal runs too.
    #[serde(default)]
    pub track_entropy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
}

impl RunConfig {
    /// relu AE with dropout 0.2, h_dim 64, 2 layers; Adam at 1e-3 for 250
    /// epochs of batch 256; `N_eval` 1024, `k` 100, `R_down` 0.1.
    pub fn default_ae(input_dim: usize, seed: u64) -> Self {
        let t = TrainConfig::<f64>::new(seed);
        Self {
            model: ModelSpec::Ae(AeConfig::default_for(input_dim)),
            optimizer: t.optimizer,
            batch_size: t.batch_size,
            epochs: t.epochs,
            stopper: StopperConfig::default(),
            n_eval: t.n_eval,
            seed,
            track_entropy: false,
            data: None,
        }
    }

    /// Leaky-ReLU `[d, 32, 16]` embedding, otherwise as [`Self::default_ae`].
    pub fn default_svdd(input_dim: usize, seed: u64) -> Self {
        Self {
            model: ModelSpec::Svdd(SvddConfig::default_for(input_dim)),
            ..Self::default_ae(input_dim, seed)
        }
    }

    pub fn train_config(&self) -> TrainConfig<f64> {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            optimizer: self.optimizer,
            n_eval: self.n_eval,
            track_entropy: self.track_entropy,
            seed: self.seed,
        }
    }

    pub fn stop_mode(&self, mode: Mode) -> StopMode<f64> {
        match mode {
            Mode::Naive => StopMode::Naive,
            Mode::Entropy => StopMode::Entropy(self.stopper),
            Mode::Optimal => StopMode::Optimal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.stopper.validate()?;
        match &self.model {
            ModelSpec::Ae(c) => {
                if c.layers == 0 || c.h_dim == 0 {
                    return Err(Error::invalid("autoencoder needs layers >= 1 and h_dim >= 1"));
                }
                if !(0.0..1.0).contains(&c.dropout) {
                    return Err(Error::invalid(format!("dropout {} outside [0, 1)", c.dropout)));
                }
            }
            ModelSpec::Svdd(c) => {
                if c.dims.len() < 2 || c.dims.contains(&0) {
                    return Err(Error::invalid("embedding widths must be positive, at least two of them"));
                }
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON encoding, without the data source.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.data = None;
        let json = serde_json::to_vec(&canonical).expect("configs always serialize");
        hex::encode(Sha256::digest(json))
    }

    /// First 12 hex digits of [`Self::hash`], for file names.
    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }

    pub fn activation_name(&self) -> &'static str {
        let act = match &self.model {
            ModelSpec::Ae(c) => c.activation,
            ModelSpec::Svdd(c) => Activation::LeakyRelu(c.relu_slope),
        };
        activation_name(act)
    }
}

pub fn activation_name(act: Activation<f64>) -> &'static str {
    match act {
        Activation::Relu => "relu",
        Activation::LeakyRelu(_) => "leaky_relu",
        Activation::Sigmoid => "sigmoid",
        Activation::Identity => "identity",
    }
}

pub fn parse_activation(s: &str) -> Result<Activation<f64>> {
    match s.to_ascii_lowercase().as_str() {
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        "identity" | "linear" => Ok(Activation::Identity),
        other => Err(Error::invalid(format!("unknown activation {other:?}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Naive,
    Entropy,
    Optimal,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Naive, Mode::Entropy, Mode::Optimal];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Naive => "naive",
            Mode::Entropy => "entropy",
            Mode::Optimal => "optimal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(Mode::Naive),
            "entropy" => Ok(Mode::Entropy),
            "optimal" => Ok(Mode::Optimal),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}
