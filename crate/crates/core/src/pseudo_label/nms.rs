use crate::geometry3d::{bev_iou, iou_2d};
use crate::kitti_io::{Box2D, Box3D};

/// Greedy suppression by descending score (lower index first on ties): a
/// box is dropped when its IoU with an already kept box exceeds
/// `iou_thresh`. Returns kept indices in selection order.
pub fn nms(boxes: &[Box2D], scores: &[f64], iou_thresh: f64) -> Vec<usize> {
    greedy(scores, iou_thresh, |a, b| iou_2d(&boxes[a], &boxes[b]))
}

/// [`nms`] with rotated bird's-eye-view overlap.
pub fn nms_bev(boxes: &[Box3D], scores: &[f64], iou_thresh: f64) -> Vec<usize> {
    greedy(scores, iou_thresh, |a, b| bev_iou(&boxes[a], &boxes[b]))
}

fn greedy(scores: &[f64], iou_thresh: f64, overlap: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| overlap(i, k) <= iou_thresh) {
            kept.push(i);
        }
    }
    kept
}
