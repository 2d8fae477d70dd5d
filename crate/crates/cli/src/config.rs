use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use weak3d::eval::{DifficultyRule, IouKind};
use weak3d::frustum_labeler::FrustumConfig;
use weak3d::geometry3d::GradientCheckConfig;
use weak3d::guidance::LossWeights;
use weak3d::kitti_io::SceneConfig;
use weak3d::pseudo_label::{FilterConfig, SimulatedDetectorConfig};

use crate::error::{usage, usage_err, CliResult};

pub const RESOLVED_CONFIG: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub frames: usize,
    pub scene: SceneConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            frames: 10,
            scene: SceneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub rule: DifficultyRule,
    pub iou_kinds: Vec<IouKind>,
    pub thresholds: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            rule: DifficultyRule::default(),
            iou_kinds: vec![IouKind::ThreeD, IouKind::Bev, IouKind::TwoD],
            thresholds: vec![0.5, 0.7],
        }
    }
}

/// Everything a run depends on. Loaded from TOML, then overridden by flags;
/// the top-level seed is copied into every seeded section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_root: Option<PathBuf>,
    pub split: String,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
    pub synth: SynthSection,
    pub frustum: FrustumConfig,
    pub filter: FilterConfig,
    pub detector: SimulatedDetectorConfig,
    pub loss_weights: LossWeights,
    pub eval: EvalSection,
    pub gradients: GradientCheckConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data_root: None,
            split: "training".into(),
            seed: 0,
            out_dir: None,
            workers: None,
            synth: SynthSection::default(),
            frustum: FrustumConfig::default(),
            filter: FilterConfig::default(),
            detector: SimulatedDetectorConfig::default(),
            loss_weights: LossWeights::default(),
            eval: EvalSection::default(),
            gradients: GradientCheckConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(usage)?;
        toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(usage)
    }

    /// Propagate the seed and check every section.
    pub fn resolve(mut self) -> CliResult<Self> {
        self.frustum.seed = self.seed;
        self.frustum.ground.seed = self.seed;
        self.detector.seed = self.seed;
        self.gradients.seed = self.seed;
        self.filter.validate().map_err(usage)?;
        self.synth.scene.validate().map_err(usage)?;
        self.eval.rule.validate().map_err(usage)?;
        if let Some(t) = self.eval.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(usage_err!("IoU threshold {t} is outside [0, 1]"));
        }
        if self.workers == Some(0) {
            return Err(usage_err!("workers must be at least 1"));
        }
        Ok(self)
    }

    pub fn data_root(&self) -> CliResult<&Path> {
        self.data_root
            .as_deref()
            .ok_or_else(|| usage_err!("no dataset root: pass --root or set WEAK3D_DATA_ROOT"))
    }

    pub fn out_dir(&self) -> CliResult<&Path> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| usage_err!("no output directory: pass --out"))
    }

    /// Write the resolved configuration into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir)?;
        let text = toml::to_string_pretty(self).context("serializing config")?;
        std::fs::write(dir.join(RESOLVED_CONFIG), text)?;
        Ok(())
    }
}
