use serde::{Deserialize, Serialize};

use super::{hungarian_match, nms, nms_bev, FilterConfig, MatchResult, NmsSpace, PseudoLabelError};
use crate::geometry3d::{iou_2d, projected_aabb};
use crate::kitti_io::{Box2D, Box3D, Calibration, FrameLabelSet, ImageExtent, LabeledObject};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCounts {
    pub predictions: usize,
    /// Predictions dropped because no corner lies in front of the camera.
    pub behind_camera: usize,
    pub matched: usize,
    pub overlap: usize,
    pub rescued: usize,
}

impl std::ops::AddAssign for RoundCounts {
    fn add_assign(&mut self, o: Self) {
        self.predictions += o.predictions;
        self.behind_camera += o.behind_camera;
        self.matched += o.matched;
        self.overlap += o.overlap;
        self.rescued += o.rescued;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    /// Prediction indices kept by the overlap gate, ascending.
    pub overlap: Vec<usize>,
    /// Prediction indices rescued by score, ascending.
    pub rescued: Vec<usize>,
    pub matching: MatchResult,
    /// Kept predictions in ascending prediction order.
    pub labels: FrameLabelSet,
    pub counts: RoundCounts,
}

/// One pass of the pseudo-label filter over a frame.
///
/// Predictions are the objects of `preds` carrying a scored 3D box.
/// `sigma_i[j]` is the 2D detector confidence of `annos.objects[j]`;
/// `DontCare` annotations take no part in matching.
pub fn filter_round(
    preds: &FrameLabelSet,
    annos: &FrameLabelSet,
    sigma_i: &[f64],
    calib: &Calibration,
    extent: Option<ImageExtent>,
    cfg: &FilterConfig,
) -> Result<RoundOutcome, PseudoLabelError> {
    if sigma_i.len() != annos.objects.len() {
        return Err(PseudoLabelError::ScoreCountMismatch {
            annotations: annos.objects.len(),
            scores: sigma_i.len(),
        });
    }
    let mut counts = RoundCounts::default();
    // (prediction index, box, sigma_p, projection)
    let mut cands: Vec<(usize, Box3D, f64, Box2D)> = Vec::new();
    for (i, o) in preds.objects.iter().enumerate() {
        let Some(b) = o.box3d.filter(|_| !o.is_dont_care()) else {
            continue;
        };
        counts.predictions += 1;
        let sigma_p = b.score.ok_or(PseudoLabelError::MissingScore(i))?;
        match projected_aabb(&b, calib, extent) {
            Ok(p) => cands.push((i, b, sigma_p, p)),
            Err(_) => counts.behind_camera += 1,
        }
    }
    let anno_idx: Vec<usize> = (0..annos.objects.len())
        .filter(|&j| !annos.objects[j].is_dont_care())
        .collect();
    let iou: Vec<Vec<f64>> = cands
        .iter()
        .map(|c| anno_idx.iter().map(|&j| iou_2d(&c.3, &annos.objects[j].box2d)).collect())
        .collect();
    let local = hungarian_match(&iou, 0.0);

    let mut matching = MatchResult::default();
    let mut in_overlap = vec![false; cands.len()];
    let mut anno_of: Vec<Option<usize>> = vec![None; cands.len()];
    for p in &local.pairs {
        let gt = anno_idx[p.gt];
        let fused = 0.5 * (cands[p.pred].2 + sigma_i[gt]);
        if p.iou > cfg.alpha0 && fused > cfg.alpha1 {
            in_overlap[p.pred] = true;
            anno_of[p.pred] = Some(gt);
        }
        matching.pairs.push(super::MatchedPair {
            pred: cands[p.pred].0,
            gt,
            iou: p.iou,
            fused: Some(fused),
        });
    }
    matching.unmatched_preds = local.unmatched_preds.iter().map(|&k| cands[k].0).collect();
    matching.unmatched_gts = local.unmatched_gts.iter().map(|&k| anno_idx[k]).collect();
    counts.matched = matching.pairs.len();

    let rest: Vec<usize> = (0..cands.len()).filter(|&k| !in_overlap[k]).collect();
    let scores: Vec<f64> = rest.iter().map(|&k| cands[k].2).collect();
    let survivors = match cfg.nms_space {
        NmsSpace::Image => {
            let boxes: Vec<Box2D> = rest.iter().map(|&k| cands[k].3).collect();
            nms(&boxes, &scores, cfg.nms_iou)
        }
        NmsSpace::Bev => {
            let boxes: Vec<Box3D> = rest.iter().map(|&k| cands[k].1).collect();
            nms_bev(&boxes, &scores, cfg.nms_iou)
        }
    };
    let mut in_rescue = vec![false; cands.len()];
    for s in survivors {
        if scores[s] > cfg.alpha2 {
            in_rescue[rest[s]] = true;
        }
    }

    let mut labels = FrameLabelSet::new(preds.frame_id.clone(), preds.provenance);
    let mut overlap = Vec::new();
    let mut rescued = Vec::new();
    for (k, (i, b, _, proj)) in cands.iter().enumerate() {
        let obj = if let Some(j) = anno_of[k] {
            overlap.push(*i);
            let a = &annos.objects[j];
            LabeledObject {
                class: preds.objects[*i].class.clone(),
                box2d: a.box2d,
                box3d: Some(*b),
                truncation: a.truncation,
                occlusion: a.occlusion,
            }
        } else if in_rescue[k] {
            rescued.push(*i);
            LabeledObject::new(preds.objects[*i].class.clone(), *proj).with_box3d(*b)
        } else {
            continue;
        };
        labels.objects.push(obj);
    }
    counts.overlap = overlap.len();
    counts.rescued = rescued.len();
    Ok(RoundOutcome {
        overlap,
        rescued,
        matching,
        labels,
        counts,
    })
}
