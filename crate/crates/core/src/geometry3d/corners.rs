use crate::kitti_io::{Box3D, Calibration};

/// Local corner signs `(length, width)`: counter-clockwise seen from above.
pub(crate) const FOOTPRINT_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

/// Eight box corners in the camera frame. Indices 0..4 are the bottom face
/// (counter-clockwise seen from above), 4..8 the top face in the same order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSet3D(pub [[f64; 3]; 8]);

/// Local offset of corner `k` before rotation: `(±l/2, {0, -h}, ±w/2)`.
fn local_offset(b: &Box3D, k: usize) -> [f64; 3] {
    let (sl, sw) = FOOTPRINT_SIGNS[k % 4];
    let ly = if k < 4 { 0.0 } else { -b.dims.h };
    [sl * b.dims.l / 2.0, ly, sw * b.dims.w / 2.0]
}

pub fn corners_3d(b: &Box3D) -> CornerSet3D {
    let (s, c) = b.yaw.sin_cos();
    let [x, y, z] = b.location;
    CornerSet3D(std::array::from_fn(|k| {
        let [lx, ly, lz] = local_offset(b, k);
        [x + c * lx + s * lz, y + ly, z - s * lx + c * lz]
    }))
}

/// Jacobian of each corner with respect to `(x, y, z, h, w, l, yaw)`:
/// `out[k][axis][param]`.
pub(crate) fn corner_jacobians(b: &Box3D) -> [[[f64; 7]; 3]; 8] {
    let (s, c) = b.yaw.sin_cos();
    std::array::from_fn(|k| {
        let (sl, sw) = FOOTPRINT_SIGNS[k % 4];
        let sy = if k < 4 { 0.0 } else { -1.0 };
        let [lx, _, lz] = local_offset(b, k);
        [
            [1.0, 0.0, 0.0, 0.0, s * sw / 2.0, c * sl / 2.0, -s * lx + c * lz],
            [0.0, 1.0, 0.0, sy, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, c * sw / 2.0, -s * sl / 2.0, -c * lx - s * lz],
        ]
    })
}

/// Depth below which a projected point is treated as behind the camera.
pub const DEPTH_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub valid: bool,
}

/// Eight projected corners in [`CornerSet3D`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSet2D(pub [ProjectedPoint; 8]);

/// Perspective projection of rectified camera points. Points at depth
/// `<= 1e-6` are flagged invalid, not dropped.
pub fn project_points(points: &[[f64; 3]], calib: &Calibration) -> Vec<ProjectedPoint> {
    points.iter().map(|&p| project_point(p, calib)).collect()
}

pub(crate) fn project_point(p: [f64; 3], calib: &Calibration) -> ProjectedPoint {
    let (u, v, depth) = calib.project(p);
    ProjectedPoint {
        u,
        v,
        depth,
        valid: depth > DEPTH_EPSILON,
    }
}

pub fn project_corners(b: &Box3D, calib: &Calibration) -> CornerSet2D {
    let corners = corners_3d(b);
    CornerSet2D(corners.0.map(|p| project_point(p, calib)))
}
