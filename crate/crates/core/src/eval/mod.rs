//! Detection metrics: AP at 40 recall positions, difficulty buckets and
//! pseudo-label recall tables.

mod ap;
mod recall;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry3d::{bev_iou, iou_2d, iou_3d};
use crate::kitti_io::LabeledObject;

pub use ap::{ap40, match_frame, MatchOutcome, PrCurve, RECALL_POSITIONS};
pub use recall::{greedy_pairs, recall_table, RecallRow, RecallTable};
pub use report::{evaluate, EvalReport, MetricEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no ground truth in bucket {0}")]
    NoGroundTruth(Difficulty),
    #[error("detection {index} of frame {frame} has no score")]
    MissingScore { frame: String, index: usize },
    #[error("unknown IoU kind '{0}'")]
    UnknownIouKind(String),
    #[error("invalid difficulty rule: {0}")]
    InvalidRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    fn index(self) -> usize {
        self as usize
    }

    /// Column heading used in tables.
    pub fn short_name(self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Moderate => "Mod.",
            Difficulty::Hard => "Hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Per-bucket limits, indexed Easy, Moderate, Hard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyRule {
    pub min_height: [f64; 3],
    pub max_occlusion: [u8; 3],
    pub max_truncation: [f64; 3],
}

impl Default for DifficultyRule {
    fn default() -> Self {
        Self {
            min_height: [40.0, 25.0, 25.0],
            max_occlusion: [0, 1, 2],
            max_truncation: [0.15, 0.30, 0.50],
        }
    }
}

impl DifficultyRule {
    /// Accepts nothing but the default ordering: each bucket at least as
    /// permissive as the one before it.
    pub fn validate(&self) -> Result<(), EvalError> {
        for k in 1..3 {
            if self.min_height[k] > self.min_height[k - 1]
                || self.max_occlusion[k] < self.max_occlusion[k - 1]
                || self.max_truncation[k] < self.max_truncation[k - 1]
            {
                return Err(EvalError::InvalidRule(format!(
                    "bucket {k} is stricter than bucket {}",
                    k - 1
                )));
            }
        }
        if self.min_height.iter().chain(&self.max_truncation).any(|v| !v.is_finite()) {
            return Err(EvalError::InvalidRule("non-finite limit".into()));
        }
        Ok(())
    }

    fn qualifies(&self, obj: &LabeledObject, d: Difficulty) -> bool {
        let k = d.index();
        obj.box2d.height() >= self.min_height[k]
            && obj.occlusion <= self.max_occlusion[k]
            && obj.truncation <= self.max_truncation[k]
    }
}

/// Smallest bucket the object qualifies for, or `None` when it is ignored.
pub fn assign_difficulty(obj: &LabeledObject, rule: &DifficultyRule) -> Option<Difficulty> {
    Difficulty::ALL.into_iter().find(|&d| rule.qualifies(obj, d))
}

/// Whether a ground-truth object counts in `bucket` (buckets are nested).
pub fn in_bucket(obj: &LabeledObject, rule: &DifficultyRule, bucket: Difficulty) -> bool {
    assign_difficulty(obj, rule).is_some_and(|d| d <= bucket)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IouKind {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "bev")]
    Bev,
    #[serde(rename = "3d")]
    ThreeD,
}

impl IouKind {
    pub const ALL: [IouKind; 3] = [IouKind::TwoD, IouKind::Bev, IouKind::ThreeD];

    pub fn name(self) -> &'static str {
        match self {
            IouKind::TwoD => "2d",
            IouKind::Bev => "bev",
            IouKind::ThreeD => "3d",
        }
    }

    /// Overlap of two labeled objects, or `None` when a needed 3D box is missing.
    pub fn overlap(self, a: &LabeledObject, b: &LabeledObject) -> Option<f64> {
        match self {
            IouKind::TwoD => Some(iou_2d(&a.box2d, &b.box2d)),
            IouKind::Bev => Some(bev_iou(a.box3d.as_ref()?, b.box3d.as_ref()?)),
            IouKind::ThreeD => Some(iou_3d(a.box3d.as_ref()?, b.box3d.as_ref()?)),
        }
    }
}

impl fmt::Display for IouKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IouKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(IouKind::TwoD),
            "bev" => Ok(IouKind::Bev),
            "3d" => Ok(IouKind::ThreeD),
            _ => Err(EvalError::UnknownIouKind(s.to_string())),
        }
    }
}
