use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{in_bucket, Difficulty, DifficultyRule, EvalError, IouKind};
use crate::geometry3d::iou_2d;
use crate::kitti_io::FrameLabelSet;

pub const RECALL_POSITIONS: usize = 40;

/// Detections below this 2D IoU with a `DontCare` region count as real.
const DONT_CARE_IOU: f64 = 0.5;

/// Interpolated precision at recall `k / 40`, `k = 1..=40`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub ap: f64,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
}

/// Per-frame matching result: `(score, is_true_positive)` for every
/// detection that was not ignored, and the number of ground-truth objects
/// in the bucket.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchOutcome {
    pub scored: Vec<(f64, bool)>,
    pub n_gt: usize,
}

impl MatchOutcome {
    pub fn merge(mut self, other: MatchOutcome) -> Self {
        self.scored.extend(other.scored);
        self.n_gt += other.n_gt;
        self
    }
}

/// Greedy score-order matching within one frame. Each detection takes the
/// unmatched in-bucket object of its class with the highest overlap; a
/// detection that only reaches an out-of-bucket object, or that lies on a
/// `DontCare` region, is ignored.
pub fn match_frame(
    dets: Option<&FrameLabelSet>,
    gts: Option<&FrameLabelSet>,
    kind: IouKind,
    thresh: f64,
    bucket: Difficulty,
    rule: &DifficultyRule,
) -> Result<MatchOutcome, EvalError> {
    let empty = Vec::new();
    let gt_objs = gts.map_or(&empty, |g| &g.objects);
    let counted: Vec<bool> = gt_objs
        .iter()
        .map(|o| !o.is_dont_care() && in_bucket(o, rule, bucket))
        .collect();
    let n_gt = counted.iter().filter(|&&c| c).count();

    let mut order: Vec<(usize, f64)> = Vec::new();
    if let Some(d) = dets {
        for (i, o) in d.objects.iter().enumerate() {
            if o.is_dont_care() {
                continue;
            }
            let s = o.score().ok_or_else(|| EvalError::MissingScore {
                frame: d.frame_id.clone(),
                index: i,
            })?;
            order.push((i, s));
        }
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut taken = vec![false; gt_objs.len()];
    let mut scored = Vec::with_capacity(order.len());
    for (i, score) in order {
        let det = &dets.expect("non-empty order implies detections").objects[i];
        let mut best: [Option<(usize, f64)>; 2] = [None, None];
        for (j, g) in gt_objs.iter().enumerate() {
            if taken[j] || g.is_dont_care() || g.class != det.class {
                continue;
            }
            let Some(iou) = kind.overlap(det, g) else {
                continue;
            };
            if iou < thresh {
                continue;
            }
            let slot = &mut best[usize::from(!counted[j])];
            if slot.map_or(true, |(_, b)| iou > b) {
                *slot = Some((j, iou));
            }
        }
        if let Some((j, _)) = best[0] {
            taken[j] = true;
            scored.push((score, true));
        } else if let Some((j, _)) = best[1] {
            taken[j] = true;
        } else if det.box3d.is_none() && kind != IouKind::TwoD {
            // Cannot be evaluated in 3D; neither a hit nor a miss.
        } else if gt_objs
            .iter()
            .any(|g| g.is_dont_care() && iou_2d(&det.box2d, &g.box2d) > DONT_CARE_IOU)
        {
        } else {
            scored.push((score, false));
        }
    }
    Ok(MatchOutcome { scored, n_gt })
}

/// AP at 40 recall positions over a set of frames, joined by frame id.
pub fn ap40(
    dets: &[FrameLabelSet],
    gts: &[FrameLabelSet],
    kind: IouKind,
    thresh: f64,
    bucket: Difficulty,
    rule: &DifficultyRule,
) -> Result<PrCurve, EvalError> {
    let mut frames: BTreeMap<&str, (Option<&FrameLabelSet>, Option<&FrameLabelSet>)> =
        BTreeMap::new();
    for d in dets {
        frames.entry(d.frame_id.as_str()).or_default().0 = Some(d);
    }
    for g in gts {
        frames.entry(g.frame_id.as_str()).or_default().1 = Some(g);
    }
    let mut total = MatchOutcome::default();
    for (d, g) in frames.values() {
        total = total.merge(match_frame(*d, *g, kind, thresh, bucket, rule)?);
    }
    if total.n_gt == 0 {
        return Err(EvalError::NoGroundTruth(bucket));
    }
    Ok(curve_from(total))
}

pub(super) fn curve_from(mut m: MatchOutcome) -> PrCurve {
    m.scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    // (true positives, precision) after each distinct score threshold.
    let mut points: Vec<(usize, f64)> = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &(score, hit)) in m.scored.iter().enumerate() {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = m.scored.get(k + 1).map_or(true, |n| n.0 != score);
        if last_of_group {
            points.push((tp, tp as f64 / (tp + fp) as f64));
        }
    }
    let n = m.n_gt;
    let mut recall = Vec::with_capacity(RECALL_POSITIONS);
    let mut precision = Vec::with_capacity(RECALL_POSITIONS);
    for k in 1..=RECALL_POSITIONS {
        let p = points
            .iter()
            .filter(|&&(tp, _)| tp * RECALL_POSITIONS >= k * n)
            .map(|&(_, p)| p)
            .fold(0.0, f64::max);
        recall.push(k as f64 / RECALL_POSITIONS as f64);
        precision.push(p);
    }
    let ap = precision.iter().sum::<f64>() / RECALL_POSITIONS as f64;
    PrCurve {
        ap,
        recall,
        precision,
    }
}
