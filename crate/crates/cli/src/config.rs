//! Run configuration file.

use std::path::Path;

use mars_core::model::{ArchitectureSpec, Conv1dLayer, Conv2dLayer, FusionVariant, LossWeights, Reduction};
use mars_core::motiongen::{
    source_taxonomy, target_taxonomy, taxonomy_from_names, CorpusSpec, NoiseModel,
};
use mars_core::pipeline::{Convergence, TrainConfig};
use mars_core::sigproc::{sensor_set, PreprocessOptions, SENSOR_SETS};
use mars_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Root of every random stream.
    pub seed: u64,
    pub corpus: CorpusSection,
    pub architecture: ArchitectureSection,
    pub training: TrainingSection,
    pub transfer: TransferSection,
    pub ablation: AblationSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Source,
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// Preset supplying the taxonomy and noise defaults.
    pub kind: CorpusKind,
    /// Class names overriding the preset taxonomy.
    pub classes: Option<Vec<String>>,
    pub sequences_per_class: Option<usize>,
    pub duration_range: Option<[f64; 2]>,
    pub frame_rate: f64,
    pub noise: Option<NoiseModel>,
    /// Sensor set of the windowed dataset.
    pub sensors: String,
    pub cutoff_hz: Option<f64>,
    pub root_normalize: bool,
    pub window: usize,
    pub stride: usize,
    pub test_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let p = PreprocessOptions::default();
        Self {
            kind: CorpusKind::Target,
            classes: None,
            sequences_per_class: None,
            duration_range: None,
            frame_rate: 60.0,
            noise: None,
            sensors: "3".into(),
            cutoff_hz: p.cutoff_hz,
            root_normalize: p.root_normalize,
            window: p.window,
            stride: p.stride,
            test_fraction: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchitecturePreset {
    /// The full-size layer plan.
    Standard,
    /// The small plan used for gradient checks and quick runs.
    Shrunken,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureSection {
    pub preset: ArchitecturePreset,
    pub fusion_dim: Option<usize>,
    pub conv1d: Option<Vec<Conv1dLayer>>,
    pub conv2d: Option<Vec<Conv2dLayer>>,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        Self {
            preset: ArchitecturePreset::Standard,
            fusion_dim: None,
            conv1d: None,
            conv2d: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub fusion: FusionVariant,
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: u64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub beta_reconstruction: f64,
    pub beta_weight_decay: f64,
    pub beta_fairness: f64,
    pub reconstruction_reduction: Reduction,
    pub convergence_threshold: f64,
    pub convergence_patience: usize,
    pub stop_on_convergence: bool,
    pub stop_at_eval_accuracy: Option<f64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            fusion: t.fusion,
            lr0: t.lr0,
            decay_factor: t.decay_factor,
            decay_every: t.decay_every,
            max_epochs: t.max_epochs,
            batch_size: t.batch_size,
            beta_reconstruction: t.loss.reconstruction,
            beta_weight_decay: t.loss.weight_decay,
            beta_fairness: t.loss.fairness,
            reconstruction_reduction: t.loss.reconstruction_reduction,
            convergence_threshold: t.convergence.threshold,
            convergence_patience: t.convergence.patience,
            stop_on_convergence: t.stop_on_convergence,
            stop_at_eval_accuracy: t.stop_at_eval_accuracy,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    /// Fine-tuning epoch cap; defaults to `training.max_epochs`.
    pub max_epochs: Option<usize>,
    /// Fine-tuning initial learning rate; defaults to `training.lr0`.
    pub lr0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSection {
    pub sets: Vec<String>,
    /// Epoch cap per sensor set; defaults to `training.max_epochs`.
    pub max_epochs: Option<usize>,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            sets: SENSOR_SETS.iter().map(|s| s.to_string()).collect(),
            max_epochs: None,
        }
    }
}

/// Derives an independent seed for one consumer of randomness.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    // Keep seeds representable as TOML integers.
    (z ^ (z >> 31)) >> 1
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| key_at(text, s.start))
                .unwrap_or_default();
            Error::config(key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", "must be at most 2^63 - 1"));
        }
        sensor_set(&self.corpus.sensors).map_err(|e| Error::config("corpus.sensors", e.to_string()))?;
        if !(0.0..1.0).contains(&self.corpus.test_fraction) {
            return Err(Error::config("corpus.test_fraction", "must lie in [0, 1)"));
        }
        if self.corpus.window == 0 || self.corpus.stride == 0 {
            return Err(Error::config("corpus.window", "window and stride must be >= 1"));
        }
        if let Some(c) = self.corpus.cutoff_hz {
            if !(c > 0.0 && c < self.corpus.frame_rate / 2.0) {
                return Err(Error::config("corpus.cutoff_hz", "must lie between 0 and half the frame rate"));
            }
        }
        self.corpus_spec()?.validate()?;
        for s in &self.ablation.sets {
            sensor_set(s).map_err(|e| Error::config("ablation.sets", e.to_string()))?;
        }
        self.train_config().validate()?;
        if let Some(lr) = self.transfer.lr0 {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::config("transfer.lr0", "must be > 0"));
            }
        }
        if let Some(goal) = self.training.stop_at_eval_accuracy {
            if !(0.0..=1.0).contains(&goal) {
                return Err(Error::config("training.stop_at_eval_accuracy", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn corpus_spec(&self) -> Result<CorpusSpec> {
        let c = &self.corpus;
        let mut spec = match c.kind {
            CorpusKind::Source => CorpusSpec::source_default(),
            CorpusKind::Target => CorpusSpec::target_default(),
        };
        if let Some(names) = &c.classes {
            spec.taxonomy = taxonomy_from_names(names).map_err(|e| Error::config("corpus.classes", e.to_string()))?;
        } else {
            spec.taxonomy = match c.kind {
                CorpusKind::Source => source_taxonomy(),
                CorpusKind::Target => target_taxonomy(),
            };
        }
        if let Some(n) = c.sequences_per_class {
            spec.sequences_per_class = n;
        }
        if let Some([lo, hi]) = c.duration_range {
            spec.duration_range = (lo, hi);
        }
        if let Some(noise) = c.noise {
            spec.noise = noise;
        }
        spec.frame_rate = c.frame_rate;
        spec.seed = derive_seed(self.seed, "corpus");
        spec.validate()?;
        Ok(spec)
    }

    pub fn preprocess(&self) -> PreprocessOptions {
        PreprocessOptions {
            cutoff_hz: self.corpus.cutoff_hz,
            root_normalize: self.corpus.root_normalize,
            window: self.corpus.window,
            stride: self.corpus.stride,
        }
    }

    /// Layer plan for `channels` input channels.
    pub fn architecture(&self, channels: usize, window: usize) -> Result<ArchitectureSpec> {
        let a = &self.architecture;
        let mut spec = match a.preset {
            ArchitecturePreset::Standard => ArchitectureSpec::standard(channels),
            ArchitecturePreset::Shrunken => ArchitectureSpec::shrunken(),
        };
        spec.channels = channels;
        spec.window = window;
        if let Some(m) = a.fusion_dim {
            spec.fusion_dim = m;
        }
        if let Some(l) = &a.conv1d {
            spec.conv1d = l.clone();
        }
        if let Some(l) = &a.conv2d {
            spec.conv2d = l.clone();
        }
        spec.plan().map_err(|e| Error::config("architecture", e.to_string()))?;
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            lr0: t.lr0,
            decay_factor: t.decay_factor,
            decay_every: t.decay_every,
            max_epochs: t.max_epochs,
            batch_size: t.batch_size,
            loss: LossWeights {
                reconstruction: t.beta_reconstruction,
                weight_decay: t.beta_weight_decay,
                fairness: t.beta_fairness,
                reconstruction_reduction: t.reconstruction_reduction,
            },
            seed: derive_seed(self.seed, "training"),
            fusion: t.fusion,
            convergence: Convergence {
                threshold: t.convergence_threshold,
                patience: t.convergence_patience,
            },
            stop_on_convergence: t.stop_on_convergence,
            stop_at_eval_accuracy: t.stop_at_eval_accuracy,
            ..TrainConfig::default()
        }
    }

    pub fn finetune_config(&self) -> TrainConfig {
        let mut cfg = self.train_config();
        cfg.seed = derive_seed(self.seed, "finetune");
        if let Some(e) = self.transfer.max_epochs {
            cfg.max_epochs = e;
        }
        if let Some(lr) = self.transfer.lr0 {
            cfg.lr0 = lr;
        }
        cfg
    }

    pub fn ablation_config(&self) -> TrainConfig {
        let mut cfg = self.train_config();
        if let Some(e) = self.ablation.max_epochs {
            cfg.max_epochs = e;
        }
        cfg
    }
}

/// Dotted path of the TOML key whose value starts at or before `offset`.
fn key_at(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let mut section = String::new();
    let mut key = String::new();
    for line in before.lines() {
        let l = line.trim();
        if l.starts_with('[') {
            section = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = l.split_once('=') {
            key = k.trim().to_string();
        }
    }
    let last = before.rsplit('\n').next().unwrap_or("");
    if let Some((k, _)) = last.split_once('=') {
        key = k.trim().to_string();
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.train_config().lr0, 0.001);
        assert_eq!(c.architecture(36, 60).unwrap(), ArchitectureSpec::default());
    }

    #[test]
    fn round_trip_through_toml() {
        let c = Config::default();
        assert_eq!(Config::parse(&toml::to_string(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn bad_value_names_key() {
        let err = Config::parse("[training]\nlr0 = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("training.lr0"), "{err}");
        let err = Config::parse("[training]\nbatch_size = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("training.batch_size"), "{err}");
        let err = Config::parse("[corpus]\nsensors = \"7\"\n").unwrap_err();
        assert!(err.to_string().contains("corpus.sensors"), "{err}");
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        assert_ne!(derive_seed(1, "corpus"), derive_seed(1, "training"));
        assert_eq!(derive_seed(1, "corpus"), derive_seed(1, "corpus"));
        assert!(derive_seed(u64::MAX, "x") <= i64::MAX as u64);
    }
}
