//! Pseudo-label refinement: match projected 3D predictions to 2D
//! annotations, gate by overlap and fused confidence, rescue confident
//! unmatched boxes through NMS, and repeat over self-training rounds.

mod detector;
mod driver;
mod filter;
mod hungarian;
mod nms;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detector::{Detector, DetectorFailure, SimulatedDetector, SimulatedDetectorConfig};
pub use driver::{
    self_training, AbortCause, DriverAbort, RefineFrame, RoundRecord, Trajectory, RECALL_KINDS,
    RECALL_THRESHOLDS,
};
pub use filter::{filter_round, RoundCounts, RoundOutcome};
pub use hungarian::{hungarian_match, MatchResult, MatchedPair};
pub use nms::{nms, nms_bev};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PseudoLabelError {
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("prediction {0} has no 3D score")]
    MissingScore(usize),
    #[error("{annotations} annotations but {scores} 2D scores")]
    ScoreCountMismatch { annotations: usize, scores: usize },
}

/// Which overlap the rescue-step NMS uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmsSpace {
    /// Projected image boxes.
    #[default]
    Image,
    Bev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Minimum IoU between a projected prediction and its annotation.
    pub alpha0: f64,
    /// Minimum fused confidence `(sigma_p + sigma_i) / 2`.
    pub alpha1: f64,
    /// Minimum 3D score for rescuing an unmatched prediction.
    pub alpha2: f64,
    pub nms_iou: f64,
    pub nms_space: NmsSpace,
    pub max_rounds: u32,
    /// Stop once recall at 3D IoU 0.7 improves by less than this.
    pub convergence_eps: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.5,
            alpha1: 0.5,
            alpha2: 0.95,
            nms_iou: 0.5,
            nms_space: NmsSpace::Image,
            max_rounds: 3,
            convergence_eps: 0.01,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), PseudoLabelError> {
        for (name, v) in [
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("nms_iou", self.nms_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PseudoLabelError::InvalidConfig(format!(
                    "{name} = {v} is outside [0, 1]"
                )));
            }
        }
        if self.max_rounds < 1 {
            return Err(PseudoLabelError::InvalidConfig("max_rounds must be at least 1".into()));
        }
        if !(self.convergence_eps >= 0.0) {
            return Err(PseudoLabelError::InvalidConfig(format!(
                "convergence_eps = {} must be non-negative",
                self.convergence_eps
            )));
        }
        Ok(())
    }
}
