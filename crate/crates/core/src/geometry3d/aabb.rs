use serde::{Deserialize, Serialize};

use super::corners::{corner_jacobians, project_corners, CornerSet2D};
use super::overlap2d::giou_partials;
use super::GeometryError;
use crate::kitti_io::{Box2D, Box3D, Calibration, ImageExtent};

/// Two corners closer than this to an extreme are a selection tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Axis-aligned box of the projected corners: componentwise min/max over the
/// corners in front of the camera, optionally clipped to the image.
pub fn projected_aabb(
    b: &Box3D,
    calib: &Calibration,
    clip: Option<ImageExtent>,
) -> Result<Box2D, GeometryError> {
    let corners = project_corners(b, calib);
    let sel = select_extremes(&corners)?;
    let c = &corners.0;
    let aabb = Box2D::new(c[sel[0]].u, c[sel[1]].v, c[sel[2]].u, c[sel[3]].v);
    Ok(match clip {
        Some(extent) => aabb.clipped(extent),
        None => aabb,
    })
}

/// Corner index attaining `(min u, min v, max u, max v)`; the lowest index
/// wins exact ties.
fn select_extremes(corners: &CornerSet2D) -> Result<[usize; 4], GeometryError> {
    let mut sel: Option<[usize; 4]> = None;
    for (k, p) in corners.0.iter().enumerate() {
        if !p.valid {
            continue;
        }
        let s = sel.get_or_insert([k; 4]);
        let c = &corners.0;
        if p.u < c[s[0]].u {
            s[0] = k;
        }
        if p.v < c[s[1]].v {
            s[1] = k;
        }
        if p.u > c[s[2]].u {
            s[2] = k;
        }
        if p.v > c[s[3]].v {
            s[3] = k;
        }
    }
    sel.ok_or(GeometryError::AllCornersBehindCamera)
}

/// GIoU between a projected 3D box and a 2D target, with its gradient with
/// respect to `(x, y, z, h, w, l, yaw)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiouGradient {
    pub giou: f64,
    pub grad: [f64; 7],
    pub projected: Box2D,
    /// Set when two corners with different derivatives compete for a min/max
    /// within [`TIE_TOLERANCE`]; the gradient is then the one-sided derivative
    /// of the lowest-index corner.
    pub non_differentiable: bool,
}

/// Partials of `(u, v)` of every corner with respect to the box parameters.
fn corner_pixel_jacobians(b: &Box3D, calib: &Calibration) -> [[[f64; 7]; 2]; 8] {
    let corners = super::corners::corners_3d(b);
    let jac3 = corner_jacobians(b);
    let m = &calib.cam_projection;
    std::array::from_fn(|k| {
        let p = corners.0[k];
        let h = [0, 1, 2].map(|r| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2] + m[r][3]);
        let (u, v, w) = (h[0] / h[2], h[1] / h[2], h[2]);
        let mut out = [[0.0; 7]; 2];
        for (row, pix) in [(0usize, u), (1, v)] {
            for param in 0..7 {
                out[row][param] = (0..3)
                    .map(|j| (m[row][j] - pix * m[2][j]) / w * jac3[k][j][param])
                    .sum();
            }
        }
        out
    })
}

pub fn giou_gradient(
    b: &Box3D,
    target: &Box2D,
    calib: &Calibration,
) -> Result<GiouGradient, GeometryError> {
    let corners = project_corners(b, calib);
    let sel = select_extremes(&corners)?;
    let c = &corners.0;
    let projected = Box2D::new(c[sel[0]].u, c[sel[1]].v, c[sel[2]].u, c[sel[3]].v);
    let (giou, d_box) = giou_partials(&projected, target)?;
    let pix_jac = corner_pixel_jacobians(b, calib);

    // slot -> (pixel axis, extreme value)
    let slots = [(0usize, projected.x1), (1, projected.y1), (0, projected.x2), (1, projected.y2)];
    let mut grad = [0.0; 7];
    let mut non_differentiable = false;
    for (slot, &(axis, extreme)) in slots.iter().enumerate() {
        let winner = pix_jac[sel[slot]][axis];
        for (k, p) in c.iter().enumerate() {
            if k == sel[slot] || !p.valid {
                continue;
            }
            let value = if axis == 0 { p.u } else { p.v };
            if (value - extreme).abs() <= TIE_TOLERANCE {
                let rival = pix_jac[k][axis];
                let scale = winner.iter().fold(1.0f64, |acc, g| acc.max(g.abs()));
                if winner
                    .iter()
                    .zip(rival.iter())
                    .any(|(a, r)| (a - r).abs() > TIE_TOLERANCE * scale)
                {
                    non_differentiable = true;
                }
            }
        }
        for param in 0..7 {
            grad[param] += d_box[slot] * winner[param];
        }
    }
    Ok(GiouGradient {
        giou,
        grad,
        projected,
        non_differentiable,
    })
}
