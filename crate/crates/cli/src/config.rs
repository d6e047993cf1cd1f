//! Run configuration: one JSON document with a block per concern. Every block
//! rejects unknown keys and falls back to defaults for missing ones.

use std::path::{Path, PathBuf};

use distillkit::data::SyntheticSpec;
use distillkit::distill::{student_layers, teacher_layers, DistillConfig, Role};
use distillkit::residual::{DetectorConfig, EmbedMode, FeatureSpec};
use distillkit::tensor::LayerSpec;
use distillkit::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds network initialization and minibatch order.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub teacher: ModelConfig,
    pub student: ModelConfig,
    pub distill: DistillConfig,
    pub train: TrainConfig,
    /// Teacher checkpoint for `distill` and `sweep`.
    pub teacher_checkpoint: Option<PathBuf>,
    pub sweep: SweepConfig,
    pub eval: EvalConfig,
    pub embed: EmbedConfig,
    pub features: FeatureSpec,
    pub extract: ExtractConfig,
    pub detect: DetectConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            data: DataConfig::default(),
            teacher: ModelConfig {
                layers: teacher_layers(),
            },
            student: ModelConfig {
                layers: student_layers(),
            },
            distill: DistillConfig::default(),
            train: TrainConfig::default(),
            teacher_checkpoint: None,
            sweep: SweepConfig::default(),
            eval: EvalConfig::default(),
            embed: EmbedConfig::default(),
            features: FeatureSpec::default(),
            extract: ExtractConfig::default(),
            detect: DetectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// `path,label` manifest; the synthetic generator is used when absent.
    pub manifest: Option<PathBuf>,
    /// Held-out manifest. When set, `manifest` is used whole for training.
    pub test_manifest: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
    pub count_per_class: usize,
    pub test_fraction: f64,
    pub split_seed: u64,
    /// Images are resized to `image_size` x `image_size`.
    pub image_size: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            test_manifest: None,
            synthetic: SyntheticSpec::default(),
            count_per_class: 1200,
            test_fraction: 400.0 / 2400.0,
            split_seed: 0,
            image_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Which architecture and learning rate `train` uses.
    pub role: Role,
    /// Start from this checkpoint with its final dense layer re-drawn.
    pub init_from: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            role: Role::Teacher,
            init_from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub temperatures: Vec<u32>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            temperatures: vec![1, 10, 20, 30, 40, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedModel {
    pub name: String,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub models: Vec<NamedModel>,
    /// Model the others are compared against in `delta.md`.
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    /// Cover manifest; smooth synthetic covers are generated when absent.
    pub covers: Option<PathBuf>,
    pub cover_count: usize,
    pub cover_size: usize,
    pub cover_seed: u64,
    pub change_rate: f64,
    pub mode: EmbedMode,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            covers: None,
            cover_count: 200,
            cover_size: 32,
            cover_seed: 0,
            change_rate: 0.4,
            mode: EmbedMode::Uniform,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    pub features: Option<PathBuf>,
    /// Fraction of cover/stego pairs held out for testing.
    pub test_fraction: f64,
    pub detector: DetectorConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            features: None,
            test_fraction: 0.5,
            detector: DetectorConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.out);
        fix(&mut self.data.manifest);
        fix(&mut self.data.test_manifest);
        fix(&mut self.train.init_from);
        fix(&mut self.teacher_checkpoint);
        fix(&mut self.embed.covers);
        fix(&mut self.extract.manifest);
        fix(&mut self.detect.features);
        for m in &mut self.eval.models {
            if m.checkpoint.is_relative() {
                m.checkpoint = base.join(&m.checkpoint);
            }
        }
    }
}
