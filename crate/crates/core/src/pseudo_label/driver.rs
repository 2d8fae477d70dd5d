use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{filter_round, Detector, DetectorFailure, FilterConfig, PseudoLabelError, RoundCounts};
use crate::eval::{recall_table, IouKind, RecallTable};
use crate::kitti_io::{Calibration, FrameLabelSet, ImageExtent, Provenance};

/// Per-frame inputs to the refinement loop.
#[derive(Debug, Clone)]
pub struct RefineFrame {
    /// 2D annotations.
    pub annos: FrameLabelSet,
    /// 2D detector confidence per annotation.
    pub sigma_i: Vec<f64>,
    pub calib: Calibration,
    pub extent: Option<ImageExtent>,
    /// Hidden 3D ground truth, used only for recall bookkeeping.
    pub gt: Option<FrameLabelSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub labels: Vec<FrameLabelSet>,
    pub counts: RoundCounts,
    pub recall: Option<RecallTable>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_recall: Option<RecallTable>,
    pub rounds: Vec<RoundRecord>,
    /// True when the loop stopped on the recall criterion rather than on
    /// `max_rounds`.
    pub converged: bool,
}

impl Trajectory {
    /// Recall at 3D IoU 0.7 for the initial labels followed by every round.
    pub fn recall_at_07(&self) -> Option<Vec<f64>> {
        let mut v = vec![recall_07(self.initial_recall.as_ref()?)?];
        for r in &self.rounds {
            v.push(recall_07(r.recall.as_ref()?)?);
        }
        Some(v)
    }
}

pub const RECALL_KINDS: [IouKind; 2] = [IouKind::ThreeD, IouKind::Bev];
pub const RECALL_THRESHOLDS: [f64; 2] = [0.5, 0.7];

fn recall_07(t: &RecallTable) -> Option<f64> {
    t.get(IouKind::ThreeD, 0.7)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbortCause {
    #[error(transparent)]
    Config(PseudoLabelError),
    #[error("frame {frame}: {source}")]
    Filter {
        frame: String,
        source: PseudoLabelError,
    },
    #[error(transparent)]
    Detector(DetectorFailure),
}

/// The loop stopped early; `completed` holds every finished round.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("self-training aborted after {} rounds: {cause}", completed.rounds.len())]
pub struct DriverAbort {
    pub completed: Trajectory,
    pub cause: AbortCause,
}

fn gt_sets(frames: &[RefineFrame]) -> Option<Vec<FrameLabelSet>> {
    frames.iter().map(|f| f.gt.clone()).collect()
}

/// Alternate detector retraining and filtering, starting from `initial`.
/// Stops after `max_rounds`, or once recall at 3D IoU 0.7 improves by less
/// than `convergence_eps` (only when every frame carries ground truth).
pub fn self_training(
    initial: &[FrameLabelSet],
    frames: &[RefineFrame],
    detector: &mut dyn Detector,
    cfg: &FilterConfig,
) -> Result<Trajectory, DriverAbort> {
    let mut traj = Trajectory::default();
    if let Err(e) = cfg.validate() {
        return Err(DriverAbort {
            completed: traj,
            cause: AbortCause::Config(e),
        });
    }
    let gts = gt_sets(frames);
    let table = |labels: &[FrameLabelSet]| {
        gts.as_ref()
            .map(|g| recall_table(labels, g, &RECALL_KINDS, &RECALL_THRESHOLDS))
    };
    traj.initial_recall = table(initial);
    let mut previous = traj.initial_recall.as_ref().and_then(recall_07);
    let mut training: Vec<FrameLabelSet> = initial.to_vec();

    for round in 1..=cfg.max_rounds {
        let preds = match detector.predict(round, &training) {
            Ok(p) => p,
            Err(e) => {
                return Err(DriverAbort {
                    completed: traj,
                    cause: AbortCause::Detector(e),
                })
            }
        };
        let by_id: BTreeMap<&str, &FrameLabelSet> =
            preds.iter().map(|p| (p.frame_id.as_str(), p)).collect();
        let mut labels = Vec::with_capacity(frames.len());
        let mut counts = RoundCounts::default();
        for f in frames {
            let empty = FrameLabelSet::new(f.annos.frame_id.clone(), Provenance::Prediction);
            let p = by_id.get(f.annos.frame_id.as_str()).copied().unwrap_or(&empty);
            let out = match filter_round(p, &f.annos, &f.sigma_i, &f.calib, f.extent, cfg) {
                Ok(o) => o,
                Err(source) => {
                    return Err(DriverAbort {
                        completed: traj,
                        cause: AbortCause::Filter {
                            frame: f.annos.frame_id.clone(),
                            source,
                        },
                    })
                }
            };
            counts += out.counts;
            labels.push(out.labels.with_provenance(Provenance::Pseudo { round }));
        }
        let recall = table(&labels);
        let current = recall.as_ref().and_then(recall_07);
        log::info!(
            "round {round}: {} kept ({} overlap, {} rescued), recall@0.7 {:?}",
            counts.overlap + counts.rescued,
            counts.overlap,
            counts.rescued,
            current
        );
        training = labels.clone();
        traj.rounds.push(RoundRecord {
            round,
            labels,
            counts,
            recall,
        });
        if let (Some(prev), Some(cur)) = (previous, current) {
            if cur - prev < cfg.convergence_eps {
                traj.converged = true;
                break;
            }
        }
        previous = current;
    }
    Ok(traj)
}
