//! Rotated-rectangle overlap in the ground plane, and 3D IoU built on it.

use super::corners::corners_3d;
use crate::kitti_io::Box3D;

/// BEV footprint as four `(x, z)` vertices, counter-clockwise (positive
/// shoelace area).
pub fn bev_polygon(b: &Box3D) -> [[f64; 2]; 4] {
    let c = corners_3d(b).0;
    [0, 1, 2, 3].map(|k| [c[k][0], c[k][2]])
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Signed shoelace area.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Sutherland–Hodgman: clip `subject` by the convex, counter-clockwise `clip`.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (dp, dq) = (cross(a, b, p), cross(a, b, q));
            if dp >= 0.0 {
                output.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                output.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    output
}

pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let (pa, pb) = (bev_polygon(a), bev_polygon(b));
    if polygon_area(&pa) <= 0.0 || polygon_area(&pb) <= 0.0 {
        return 0.0;
    }
    polygon_area(&clip_convex(&pa, &pb)).max(0.0)
}

pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    let (aa, ab) = (a.dims.l * a.dims.w, b.dims.l * b.dims.w);
    if aa <= 0.0 || ab <= 0.0 {
        return 0.0;
    }
    // Symmetric by construction: clip the lexicographically smaller operand.
    let inter = if key(a) <= key(b) {
        bev_intersection_area(a, b)
    } else {
        bev_intersection_area(b, a)
    };
    let union = aa + ab - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

fn key(b: &Box3D) -> [u64; 7] {
    b.params().map(f64::to_bits)
}

/// Length of the overlap of the two vertical extents.
pub fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let ([at, ab], [bt, bb]) = (a.y_extent(), b.y_extent());
    (ab.min(bb) - at.max(bt)).max(0.0)
}

pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let (va, vb) = (a.volume(), b.volume());
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    let (first, second) = if key(a) <= key(b) { (a, b) } else { (b, a) };
    let inter = bev_intersection_area(first, second) * vertical_overlap(a, b);
    let union = va + vb - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Convex hull by monotone chain, counter-clockwise, without collinear points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Whether `p` lies inside (or on) a counter-clockwise convex polygon.
pub fn convex_contains(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    poly.len() >= 3
        && (0..poly.len()).all(|i| cross(poly[i], poly[(i + 1) % poly.len()], p) >= 0.0)
}

/// Point-in-footprint test used by oracles and the synthetic generator.
pub fn bev_contains(b: &Box3D, x: f64, z: f64) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let (dx, dz) = (x - b.location[0], z - b.location[2]);
    // Inverse of the corner rotation.
    let lx = c * dx - s * dz;
    let lz = s * dx + c * dz;
    lx.abs() <= b.dims.l / 2.0 && lz.abs() <= b.dims.w / 2.0
}
