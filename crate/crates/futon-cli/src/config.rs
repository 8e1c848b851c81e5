//! Run configuration: presets per task, JSON config files, and CLI
//! overrides, resolved into one concrete document that is echoed into the
//! output directory.
//!
//! Layering order: task preset, then the JSON config file, then CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use futon::basis::BasisKind;
use futon::error::{Error, Result};
use futon::model::Activation;
use futon::optim::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    FitImage,
    FitVolume,
    Superres,
    Denoise,
    Ct,
}

impl TaskKind {
    pub fn input_dim(&self) -> usize {
        match self {
            TaskKind::FitVolume => 3,
            _ => 2,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskKind,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub k: usize,
    pub rank: usize,
    pub basis: BasisKind,
    pub activation: Activation,
    pub train: TrainConfig,
    /// Steps between PSNR evaluations in the training curve (0 disables).
    pub eval_every: usize,
    /// Super-resolution downsampling factor.
    pub factor: usize,
    /// Sensor-noise photon mean.
    pub tau: f64,
    /// Sensor-noise readout standard deviation.
    pub sigma: f64,
    pub noise_seed: u64,
    /// Input already contains the degradation (denoise: input is noisy).
    pub input_is_degraded: bool,
    /// CT projection angle count.
    pub angles: usize,
    /// CT detector count; defaults to the image side when absent.
    pub detectors: Option<usize>,
    /// Edge length for synthetic inputs when no file is given.
    pub phantom_size: Option<usize>,
}

impl RunConfig {
    /// Paper-default bindings per task.
    pub fn preset(task: TaskKind) -> Self {
        let mut cfg = RunConfig {
            task,
            input: None,
            out_dir: PathBuf::from("out"),
            k: 512,
            rank: 512,
            basis: BasisKind::Cosine,
            activation: Activation::Tanh,
            train: TrainConfig::default(),
            eval_every: 100,
            factor: 4,
            tau: 50.0,
            sigma: 1.0,
            noise_seed: 0,
            input_is_degraded: false,
            angles: 150,
            detectors: None,
            phantom_size: None,
        };
        match task {
            TaskKind::FitImage => {}
            TaskKind::FitVolume => {
                cfg.k = 256;
                cfg.rank = 256;
            }
            TaskKind::Superres => {
                cfg.k = 384;
                cfg.rank = 384;
            }
            TaskKind::Denoise => {
                cfg.k = 256;
                cfg.rank = 256;
                cfg.train.tv_lambda = 1e-7;
            }
            TaskKind::Ct => {
                cfg.k = 256;
                cfg.rank = 256;
                cfg.train.epochs = 4000;
                cfg.train.weight_decay_lambda = 4e-3;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.k == 0 || self.rank == 0 {
            return Err(Error::config("k and rank must be >= 1"));
        }
        if self.factor == 0 {
            return Err(Error::config("factor must be >= 1"));
        }
        if self.task == TaskKind::Ct && self.angles == 0 {
            return Err(Error::config("ct needs at least one projection angle"));
        }
        if self.input.is_none() && self.phantom_size.is_none() {
            return Err(Error::config(
                "no input file given and no synthetic size set",
            ));
        }
        Ok(())
    }

    /// Echo the effective configuration next to the run artifacts.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(out_dir.join("resolved_config.json"), bytes)?;
        Ok(())
    }
}

/// Sparse configuration: what a JSON config file or the CLI flags may set.
/// Every present field overrides the layer below it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub k: Option<usize>,
    pub rank: Option<usize>,
    pub basis: Option<BasisKind>,
    pub activation: Option<Activation>,
    pub epochs: Option<usize>,
    pub batch_fraction: Option<f64>,
    pub lr: Option<f64>,
    pub lr_final_ratio: Option<f64>,
    pub tv_lambda: Option<f64>,
    pub weight_decay: Option<f64>,
    pub seed: Option<u64>,
    pub eval_every: Option<usize>,
    pub factor: Option<usize>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub noise_seed: Option<u64>,
    pub input_is_degraded: Option<bool>,
    pub angles: Option<usize>,
    pub detectors: Option<usize>,
    pub phantom_size: Option<usize>,
}

impl PartialConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("bad config file {}: {e}", path.display())))
    }

    pub fn apply_to(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.rank {
            cfg.rank = v;
        }
        if let Some(v) = self.basis {
            cfg.basis = v;
        }
        if let Some(v) = self.activation {
            cfg.activation = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.batch_fraction {
            cfg.train.batch_fraction = v;
        }
        if let Some(v) = self.lr {
            cfg.train.lr0 = v;
        }
        if let Some(v) = self.lr_final_ratio {
            cfg.train.lr_final_ratio = v;
        }
        if let Some(v) = self.tv_lambda {
            cfg.train.tv_lambda = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.train.weight_decay_lambda = v;
        }
        if let Some(v) = self.seed {
            cfg.train.seed = v;
        }
        if let Some(v) = self.eval_every {
            cfg.eval_every = v;
        }
        if let Some(v) = self.factor {
            cfg.factor = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.noise_seed {
            cfg.noise_seed = v;
        }
        if let Some(v) = self.input_is_degraded {
            cfg.input_is_degraded = v;
        }
        if let Some(v) = self.angles {
            cfg.angles = v;
        }
        if let Some(v) = self.detectors {
            cfg.detectors = Some(v);
        }
        if let Some(v) = self.phantom_size {
            cfg.phantom_size = Some(v);
        }
    }
}

/// Preset, overlaid by an optional JSON file, overlaid by CLI-provided
/// fields.
pub fn resolve(
    task: TaskKind,
    config_file: Option<&Path>,
    cli: &PartialConfig,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::preset(task);
    if let Some(path) = config_file {
        PartialConfig::from_json_file(path)?.apply_to(&mut cfg);
    }
    cli.apply_to(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
