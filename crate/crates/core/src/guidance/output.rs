use serde::{Deserialize, Serialize};

use super::GuidanceError;
use crate::geometry3d::{giou_gradient, iou_2d};
use crate::kitti_io::{Box2D, Box3D, Calibration};

/// Score-weighted `1 - GIoU` over matched pairs, with per-prediction gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLoss {
    pub loss: f64,
    /// Gradient of `loss` with respect to `(x, y, z, h, w, l, yaw)` of each
    /// prediction; zero for unmatched predictions.
    pub grads: Vec<[f64; 7]>,
    /// Indices of predictions whose gradient sits at a corner-selection tie.
    pub non_differentiable: Vec<usize>,
}

/// Pairs `(pred, gt)` with IoU above `floor`, taken greedily by descending
/// IoU (lower indices first on ties), each index used once.
pub fn greedy_match_2d(preds: &[Box2D], gts: &[Box2D], floor: f64) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        for (j, g) in gts.iter().enumerate() {
            let iou = iou_2d(p, g);
            if iou > floor {
                cand.push((iou, i, j));
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; preds.len()];
    let mut used_g = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in cand {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// `sum over pairs of s_j * (1 - GIoU(B_j, proj(P_i)))` where `s_j` is the 2D
/// score of ground-truth box `j` normalized over the matched boxes.
pub fn output_level_loss(
    preds: &[Box3D],
    gts: &[Box2D],
    calib: &Calibration,
    pairs: &[(usize, usize)],
) -> Result<OutputLoss, GuidanceError> {
    let mut grads = vec![[0.0; 7]; preds.len()];
    let mut non_differentiable = Vec::new();
    if pairs.is_empty() {
        return Ok(OutputLoss {
            loss: 0.0,
            grads,
            non_differentiable,
        });
    }
    let mut sum = 0.0;
    for &(i, j) in pairs {
        if i >= preds.len() || j >= gts.len() {
            return Err(GuidanceError::BadPair(i, j));
        }
        sum += gts[j].score.ok_or(GuidanceError::MissingScore(j))?;
    }
    if sum <= 0.0 {
        return Err(GuidanceError::ZeroScoreSum);
    }
    let mut loss = 0.0;
    for &(i, j) in pairs {
        let w = gts[j].score.unwrap_or_default() / sum;
        let g = giou_gradient(&preds[i], &gts[j], calib)?;
        loss += w * (1.0 - g.giou);
        for k in 0..7 {
            grads[i][k] -= w * g.grad[k];
        }
        if g.non_differentiable {
            non_differentiable.push(i);
        }
    }
    Ok(OutputLoss {
        loss,
        grads,
        non_differentiable,
    })
}
