use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uml_autograd::AdamConfig;

use crate::error::{Result, UmlError};
use crate::losses::{AnnealSchedule, LossWeights};
use crate::model::ModelConfig;
use crate::synthdata::DataConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay on weights (biases are exempt).
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self { lr: a.lr, beta1: a.beta1, beta2: a.beta2, eps: a.eps, weight_decay: a.weight_decay }
    }
}

impl OptimConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps, weight_decay: self.weight_decay }
    }
}

/// Everything that defines a run. Serialised verbatim into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds batch order; `--seed` also sets the data and init seeds.
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Both uncertainty modules off; only the mutual decoder path remains.
    pub md_only: bool,
    /// Noise levels used for the final evaluation.
    pub sigmas: Vec<f64>,
    /// Worker threads for dataset generation; results do not depend on it.
    pub data_threads: usize,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub optimizer: OptimConfig,
    pub loss: LossWeights,
    pub anneal: AnnealSchedule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 50,
            batch_size: 8,
            md_only: false,
            sigmas: vec![0.0, 0.03, 0.05],
            data_threads: 1,
            out_dir: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            optimizer: OptimConfig::default(),
            loss: LossWeights::default(),
            anneal: AnnealSchedule::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| UmlError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| UmlError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises to TOML")
    }

    /// Compact single-line form embedded in artifacts.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run config serialises to JSON")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.data.master_seed = seed;
        self.model.init_seed = seed;
    }

    pub fn set_md_only(&mut self) {
        self.md_only = true;
        self.model.use_un = false;
        self.model.use_ui = false;
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.model.validate()?;
        self.loss.validate()?;
        if self.anneal.ramp_epochs <= 0 || self.anneal.max_value.is_nan() || self.anneal.max_value < 0.0 {
            return Err(UmlError::config("anneal needs ramp_epochs > 0 and max_value >= 0"));
        }
        if self.batch_size == 0 {
            return Err(UmlError::config("batch_size must be positive"));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.eps > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.weight_decay >= 0.0) {
            return Err(UmlError::config("optimizer needs lr > 0, eps > 0, betas in [0, 1), weight_decay >= 0"));
        }
        if self.md_only && (self.model.use_un || self.model.use_ui) {
            return Err(UmlError::config("md_only conflicts with use_un/use_ui"));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(UmlError::config(format!("noise level {s} must be finite and >= 0")));
        }
        if self.data.n_train == 0 || self.data.n_val == 0 || self.data.n_test == 0 {
            return Err(UmlError::config("every split needs at least one sample"));
        }
        if self.data.ratio_threshold <= 0.0 || self.model.seg_classes != 3 {
            return Err(UmlError::config("the synthetic data has exactly 3 segmentation classes"));
        }
        if self.model.cls_classes != 2 {
            return Err(UmlError::config("the synthetic data has exactly 2 image classes"));
        }
        if self.model.in_channels != 1 {
            return Err(UmlError::config("the synthetic images have one channel"));
        }
        Ok(())
    }

    /// Table label of the ablation setting.
    pub fn variant_name(&self) -> &'static str {
        match (self.model.use_un, self.model.use_ui) {
            (false, false) => "MD",
            (true, false) => "MD+UN",
            (false, true) => "MD+UI",
            (true, true) => "MD+UN+UI",
        }
    }
}
