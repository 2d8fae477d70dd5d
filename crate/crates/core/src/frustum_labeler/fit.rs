use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::FrustumSegment;
use crate::geometry3d::{convex_hull, iou_2d, polygon_area};
use crate::kitti_io::{Box2D, Box3D};

/// Admissible dimension ranges for one class, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    pub h: [f64; 2],
    pub w: [f64; 2],
    pub l: [f64; 2],
}

impl ClassPrior {
    pub fn car() -> Self {
        Self {
            h: [1.2, 2.2],
            w: [1.4, 2.0],
            l: [3.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub min_points: usize,
    /// Share of points the fitted footprint may leave outside.
    pub outlier_budget: f64,
    /// Single-linkage radius for separating the object from stray points.
    pub cluster_radius: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            min_points: 8,
            outlier_budget: 0.05,
            cluster_radius: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    TooFewPoints,
    DegenerateFit,
    ImplausibleDims,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clusters in BEV, each sorted, ordered by lowest member.
fn clusters(bev: &[[f64; 2]], radius: f64) -> Vec<Vec<usize>> {
    let n = bev.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let cell = |p: [f64; 2]| ((p[0] / radius).floor() as i64, (p[1] / radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in bev.iter().enumerate() {
        grid.entry(cell(*p)).or_default().push(i);
    }
    let r2 = radius * radius;
    for (i, p) in bev.iter().enumerate() {
        let (cx, cz) = cell(*p);
        for dx in -1..=1 {
            for dz in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cz + dz)) else {
                    continue;
                };
                for &j in bucket {
                    if j <= i {
                        continue;
                    }
                    let q = bev[j];
                    if (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= r2 {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// The cluster whose pixel extent best explains the source box. An occluder
/// in front only covers part of the box; the object itself spans all of it.
fn object_cluster(segment: &FrustumSegment, radius: f64, min_points: usize) -> Vec<usize> {
    let bev: Vec<[f64; 2]> = segment.points.iter().map(|p| [p[0], p[2]]).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for group in clusters(&bev, radius) {
        if group.len() < min_points {
            continue;
        }
        let mut extent = Box2D::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &i in &group {
            let [u, v] = segment.pixels[i];
            extent = Box2D::new(extent.x1.min(u), extent.y1.min(v), extent.x2.max(u), extent.y2.max(v));
        }
        let score = iou_2d(&extent, &segment.source);
        let better = match &best {
            None => true,
            Some((s, g)) => score > *s || (score == *s && group.len() > g.len()),
        };
        if better {
            best = Some((score, group));
        }
    }
    best.map(|(_, g)| g).unwrap_or_default()
}

/// `(lo, hi)` after dropping `trim` values from each end.
fn trimmed_extent(values: &mut [f64], trim: usize) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    (values[trim], values[values.len() - 1 - trim])
}

/// Grow `[lo, hi]` to at least `min` by moving the end farther from `sensor`.
fn grow_away(lo: f64, hi: f64, min: f64, sensor: f64) -> (f64, f64) {
    let extra = min - (hi - lo);
    if extra <= 0.0 {
        (lo, hi)
    } else if (hi - sensor).abs() >= (lo - sensor).abs() {
        (lo, hi + extra)
    } else {
        (lo - extra, hi)
    }
}

struct Candidate {
    area: f64,
    center: [f64; 2],
    long_axis: [f64; 2],
    length: f64,
    width: f64,
}

/// Fit an oriented box to a ground-removed segment.
///
/// `sensor` is the LiDAR origin in the camera frame; dimensions clamped up
/// to the prior grow away from it, and the heading points toward it.
pub fn fit_box_heuristic(
    segment: &FrustumSegment,
    prior: &ClassPrior,
    config: &FitConfig,
    sensor: [f64; 3],
) -> Result<Box3D, Rejection> {
    if segment.len() < config.min_points {
        return Err(Rejection::TooFewPoints);
    }
    let cluster = object_cluster(segment, config.cluster_radius, config.min_points);
    if cluster.len() < config.min_points {
        return Err(Rejection::TooFewPoints);
    }
    let pts: Vec<[f64; 3]> = cluster.iter().map(|&i| segment.points[i]).collect();
    let bev: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[2]]).collect();
    let hull = convex_hull(&bev);
    if hull.len() < 3 || polygon_area(&hull) < 1e-6 {
        return Err(Rejection::DegenerateFit);
    }

    let trim = ((config.outlier_budget / 4.0) * pts.len() as f64).floor() as usize;
    let s = [sensor[0], sensor[2]];
    let mut best: Option<Candidate> = None;
    let mut a = vec![0.0; bev.len()];
    let mut b = vec![0.0; bev.len()];
    for k in 0..hull.len() {
        let (p, q) = (hull[k], hull[(k + 1) % hull.len()]);
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        if len < 1e-9 {
            continue;
        }
        let e1 = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
        let e2 = [-e1[1], e1[0]];
        for (i, v) in bev.iter().enumerate() {
            a[i] = v[0] * e1[0] + v[1] * e1[1];
            b[i] = v[0] * e2[0] + v[1] * e2[1];
        }
        let (a_lo, a_hi) = trimmed_extent(&mut a, trim);
        let (b_lo, b_hi) = trimmed_extent(&mut b, trim);
        let area = (a_hi - a_lo) * (b_hi - b_lo);
        if best.as_ref().is_some_and(|c| c.area <= area) {
            continue;
        }
        // Put the longer side on the first axis.
        let (ax, (lo1, hi1), bx, (lo2, hi2)) = if a_hi - a_lo >= b_hi - b_lo {
            (e1, (a_lo, a_hi), e2, (b_lo, b_hi))
        } else {
            (e2, (b_lo, b_hi), e1, (a_lo, a_hi))
        };
        if hi1 - lo1 > prior.l[1] || hi2 - lo2 > prior.w[1] {
            continue;
        }
        let s1 = s[0] * ax[0] + s[1] * ax[1];
        let s2 = s[0] * bx[0] + s[1] * bx[1];
        let (lo1, hi1) = grow_away(lo1, hi1, prior.l[0], s1);
        let (lo2, hi2) = grow_away(lo2, hi2, prior.w[0], s2);
        let (m1, m2) = ((lo1 + hi1) / 2.0, (lo2 + hi2) / 2.0);
        best = Some(Candidate {
            area,
            center: [m1 * ax[0] + m2 * bx[0], m1 * ax[1] + m2 * bx[1]],
            long_axis: ax,
            length: hi1 - lo1,
            width: hi2 - lo2,
        });
    }
    let Some(c) = best else {
        return Err(Rejection::ImplausibleDims);
    };

    let mut ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let (top, lowest) = trimmed_extent(&mut ys, trim);
    let bottom = match &segment.ground_plane {
        Some(plane) => plane.y_at(c.center[0], c.center[1]),
        None => lowest,
    };
    let h = (bottom - top).clamp(prior.h[0], prior.h[1]);

    let mut axis = c.long_axis;
    let to_sensor = [s[0] - c.center[0], s[1] - c.center[1]];
    if axis[0] * to_sensor[0] + axis[1] * to_sensor[1] < 0.0 {
        axis = [-axis[0], -axis[1]];
    }
    // Heading (cos yaw, -sin yaw) in (x, z).
    let yaw = (-axis[1]).atan2(axis[0]);
    Ok(Box3D::new(
        [c.center[0], bottom, c.center[1]],
        h,
        c.width,
        c.length,
        yaw,
    ))
}
