use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FrustumSegment;
use crate::rng::stream;

/// `normal · p + offset = 0`, with a unit normal pointing up (negative camera `y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Plane {
    fn through(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Option<Self> {
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let mut n = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len < 1e-9 {
            return None;
        }
        let sign = if n[1] > 0.0 { -1.0 } else { 1.0 };
        n = n.map(|x| sign * x / len);
        let offset = -(n[0] * a[0] + n[1] * a[1] + n[2] * a[2]);
        Some(Self { normal: n, offset })
    }

    /// Signed height above the plane.
    pub fn height(&self, p: &[f64; 3]) -> f64 {
        self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] + self.offset
    }

    /// Camera `y` of the plane at ground position `(x, z)`.
    pub fn y_at(&self, x: f64, z: f64) -> f64 {
        -(self.normal[0] * x + self.normal[2] * z + self.offset) / self.normal[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundConfig {
    /// Inlier distance, meters.
    pub tolerance: f64,
    pub iterations: usize,
    /// Largest accepted angle between the plane normal and vertical, degrees.
    pub max_tilt_deg: f64,
    /// A plane needs at least this many inliers, and this share of the segment.
    pub min_inliers: usize,
    pub min_inlier_fraction: f64,
    /// A ground plane may have at most this share of the remaining points
    /// below it; rejects roofs and other elevated flat surfaces.
    pub max_below_fraction: f64,
    pub seed: u64,
}

impl Default for GroundConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.1,
            iterations: 100,
            max_tilt_deg: 30.0,
            min_inliers: 10,
            min_inlier_fraction: 0.15,
            max_below_fraction: 0.05,
            seed: 0,
        }
    }
}

/// RANSAC ground removal. Returns the segment unchanged (flag unset) when no
/// acceptable plane is found.
pub fn remove_ground(segment: &FrustumSegment, config: &GroundConfig) -> FrustumSegment {
    let pts = &segment.points;
    let n = pts.len();
    let mut out = segment.clone();
    if n < 3 || config.tolerance <= 0.0 {
        return out;
    }
    let mut rng = stream(config.seed, &[n as u64]);
    let min_cos = config.max_tilt_deg.to_radians().cos();
    let needed = config
        .min_inliers
        .max((config.min_inlier_fraction * n as f64).ceil() as usize);
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..config.iterations {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let Some(plane) = Plane::through(pts[i], pts[j], pts[k]) else {
            continue;
        };
        if -plane.normal[1] < min_cos {
            continue;
        }
        let mut inliers = 0;
        let mut below = 0;
        for p in pts {
            let h = plane.height(p);
            if h.abs() <= config.tolerance {
                inliers += 1;
            } else if h < 0.0 {
                below += 1;
            }
        }
        if inliers < needed || below as f64 > config.max_below_fraction * (n - inliers) as f64 {
            continue;
        }
        if best.is_none_or(|(count, _)| inliers > count) {
            best = Some((inliers, plane));
        }
    }
    if let Some((_, plane)) = best {
        out.retain(|p| plane.height(p).abs() > config.tolerance);
        out.ground_removed = true;
        out.ground_plane = Some(plane);
    }
    out
}
