use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::kitti_io::Box2D;

/// Overlap statistics of two boxes. `hull` is the area of the smallest
/// enclosing axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub intersection: f64,
    pub union: f64,
    pub hull: f64,
    pub iou: f64,
    pub giou: f64,
}

fn intersection(a: &Box2D, b: &Box2D) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    iw * ih
}

/// Intersection over union; 0 for disjoint or zero-area inputs.
pub fn iou_2d(a: &Box2D, b: &Box2D) -> f64 {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn giou_2d(a: &Box2D, b: &Box2D) -> Result<OverlapReport, GeometryError> {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    let hull = (a.x2.max(b.x2) - a.x1.min(b.x1)) * (a.y2.max(b.y2) - a.y1.min(b.y1));
    if union <= 0.0 || hull <= 0.0 {
        return Err(GeometryError::DegenerateHull);
    }
    let iou = inter / union;
    Ok(OverlapReport {
        intersection: inter,
        union,
        hull,
        iou,
        giou: iou - (hull - union) / hull,
    })
}

/// GIoU of `a` against a fixed `b`, with partials with respect to
/// `(a.x1, a.y1, a.x2, a.y2)`. Min/max switches take the branch of `a`.
pub(crate) fn giou_partials(a: &Box2D, b: &Box2D) -> Result<(f64, [f64; 4]), GeometryError> {
    // Per axis: (lo, hi) of a and b.
    let axes = [(a.x1, a.x2, b.x1, b.x2), (a.y1, a.y2, b.y1, b.y2)];
    let mut inter_len = [0.0; 2];
    let mut d_inter_len = [[0.0; 2]; 2]; // [axis][lo, hi]
    let mut hull_len = [0.0; 2];
    let mut d_hull_len = [[0.0; 2]; 2];
    for (k, &(alo, ahi, blo, bhi)) in axes.iter().enumerate() {
        let raw = ahi.min(bhi) - alo.max(blo);
        if raw > 0.0 {
            inter_len[k] = raw;
            d_inter_len[k] = [
                if alo >= blo { -1.0 } else { 0.0 },
                if ahi <= bhi { 1.0 } else { 0.0 },
            ];
        }
        hull_len[k] = ahi.max(bhi) - alo.min(blo);
        d_hull_len[k] = [
            if alo <= blo { -1.0 } else { 0.0 },
            if ahi >= bhi { 1.0 } else { 0.0 },
        ];
    }
    let (aw, ah) = (a.x2 - a.x1, a.y2 - a.y1);
    let area_a = aw * ah;
    let inter = inter_len[0] * inter_len[1];
    let union = area_a + b.area() - inter;
    let hull = hull_len[0] * hull_len[1];
    if union <= 0.0 || hull <= 0.0 {
        return Err(GeometryError::DegenerateHull);
    }
    let giou = inter / union - 1.0 + union / hull;

    // Order of the partials: x1, y1, x2, y2 -> (axis, side).
    let slots = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let d_area_a = [-ah, -aw, ah, aw];
    let mut grad = [0.0; 4];
    for (i, &(axis, side)) in slots.iter().enumerate() {
        let other = 1 - axis;
        let d_inter = d_inter_len[axis][side] * inter_len[other];
        let d_hull = d_hull_len[axis][side] * hull_len[other];
        let d_union = d_area_a[i] - d_inter;
        grad[i] = d_inter / union - inter * d_union / (union * union) + d_union / hull
            - union * d_hull / (hull * hull);
    }
    Ok((giou, grad))
}
