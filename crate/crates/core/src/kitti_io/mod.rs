//! Benchmark file formats and the synthetic scene generator.
//!
//! Layout on disk: `{root}/{split}/{label_2|calib|velodyne|fg_mask}/{frame_id}.{txt|bin|pgm}`.
//! Synthetic datasets add a `gt_3d/` directory holding the 3D ground truth
//! that weak supervision is not allowed to see.

mod boxes;
mod calib;
mod cloud;
mod labels;
mod mask;
mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use boxes::{normalize_angle, Box2D, Box3D, Dims, ImageExtent, BOX3D_PARAM_NAMES};
pub use calib::{parse_calibration, write_calibration, Calibration, Strictness};
pub use cloud::{parse_point_cloud, write_point_cloud, PointCloud};
pub use labels::{
    parse_label_file, write_label_file, FrameLabelSet, LabeledObject, Provenance, DONT_CARE,
};
pub use mask::{parse_mask, write_mask_pgm};
pub use synth::{
    generate_synthetic_scene, scene_seed, BoxMask, PointSource, SceneConfig, SceneFiles,
    SyntheticScene,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("point buffer of {len} bytes is not a whole number of 16-byte records")]
    TruncatedRecord { len: usize },
    #[error("non-finite value in record {index}")]
    NonFiniteValue { index: usize },
    #[error("missing calibration key {0}")]
    MissingKey(String),
    #[error("bad matrix shape for {key}: {detail}")]
    BadMatrixShape { key: String, detail: String },
    #[error("rotation block of {key} is not orthonormal (error {error:.3e})")]
    NonOrthonormalRotation { key: String, error: f64 },
    #[error("line {line}: expected 15 or 16 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("unparsable number {0:?}")]
    UnparsableNumber(String),
    #[error("object {index} has no 3D box")]
    MissingBox3D { index: usize },
    #[error("cannot place the requested boxes after {attempts} attempts")]
    ConfigInfeasible { attempts: usize },
    #[error("invalid scene configuration: {0}")]
    InvalidConfig(String),
    #[error("bad mask raster: {0}")]
    BadMask(String),
}

/// Directory names under `{root}/{split}`.
pub mod dirs {
    pub const LABEL_2: &str = "label_2";
    pub const CALIB: &str = "calib";
    pub const VELODYNE: &str = "velodyne";
    pub const FG_MASK: &str = "fg_mask";
    pub const GT_3D: &str = "gt_3d";
}

/// Paths of one split of a dataset in the benchmark layout.
#[derive(Debug, Clone)]
pub struct SplitLayout {
    pub base: PathBuf,
}

impl SplitLayout {
    pub fn new(root: impl AsRef<Path>, split: &str) -> Self {
        Self {
            base: root.as_ref().join(split),
        }
    }

    pub fn dir(&self, name: &str) -> PathBuf {
        self.base.join(name)
    }

    pub fn label(&self, frame_id: &str) -> PathBuf {
        self.dir(dirs::LABEL_2).join(format!("{frame_id}.txt"))
    }

    pub fn calib(&self, frame_id: &str) -> PathBuf {
        self.dir(dirs::CALIB).join(format!("{frame_id}.txt"))
    }

    pub fn velodyne(&self, frame_id: &str) -> PathBuf {
        self.dir(dirs::VELODYNE).join(format!("{frame_id}.bin"))
    }

    pub fn mask(&self, frame_id: &str) -> PathBuf {
        self.dir(dirs::FG_MASK).join(format!("{frame_id}.pgm"))
    }

    pub fn gt_3d(&self, frame_id: &str) -> PathBuf {
        self.dir(dirs::GT_3D).join(format!("{frame_id}.txt"))
    }

    /// Frame ids present in `label_2`, sorted.
    pub fn frame_ids(&self) -> std::io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(self.dir(dirs::LABEL_2))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}

/// Zero-padded six-digit frame id, as used by the benchmark.
pub fn frame_id(index: usize) -> String {
    format!("{index:06}")
}
