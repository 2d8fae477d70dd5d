//! Central-difference checks of [`giou_gradient`] on random boxes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{giou_gradient, project_corners, projected_aabb};
use crate::kitti_io::{Box2D, Box3D, Calibration};
use crate::rng::stream;

/// Cases where a competing corner lies closer than this (pixels) to a
/// min/max are redrawn, so a probe step cannot switch corners.
const SELECTION_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradientCheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub step: f64,
    pub rel_tol: f64,
    /// Negate this partial of the analytic gradient (checker self-test).
    pub inject_bug: Option<usize>,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            step: 1e-6,
            rel_tol: 1e-5,
            inject_bug: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientTrial {
    pub trial: usize,
    pub giou: f64,
    pub analytic: [f64; 7],
    pub numeric: [f64; 7],
    /// `max |numeric - analytic| / max |analytic|`.
    pub rel_error: f64,
    pub pass: bool,
}

fn random_box(rng: &mut impl Rng) -> Box3D {
    Box3D::new(
        [rng.random_range(-8.0..8.0), rng.random_range(1.4..1.9), rng.random_range(8.0..40.0)],
        rng.random_range(1.3..1.9),
        rng.random_range(1.4..2.0),
        rng.random_range(3.2..4.8),
        rng.random_range(-3.1..3.1),
    )
}

/// Smallest gap between an extreme and a corner that attains a different
/// value on the same axis.
fn selection_gap(b: &Box3D, calib: &Calibration) -> f64 {
    let c = project_corners(b, calib).0;
    if c.iter().any(|p| !p.valid) {
        return 0.0;
    }
    let mut gap = f64::INFINITY;
    for axis in 0..2 {
        let vals: Vec<f64> = c.iter().map(|p| if axis == 0 { p.u } else { p.v }).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &v in &vals {
            for e in [lo, hi] {
                let d = (v - e).abs();
                if d > 1e-9 {
                    gap = gap.min(d);
                }
            }
        }
    }
    gap
}

/// One trial per draw of a box and a target box; tied or near-tied
/// configurations are redrawn.
pub fn check_giou_gradients(cfg: &GradientCheckConfig, calib: &Calibration) -> Vec<GradientTrial> {
    let mut out = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut rng = stream(cfg.seed, &[trial as u64]);
        let (b, target) = loop {
            let b = random_box(&mut rng);
            let other = random_box(&mut rng);
            let Ok(t) = projected_aabb(&other, calib, None) else {
                continue;
            };
            let target = if rng.random_bool(0.5) {
                // Nearby target so the boxes overlap.
                let p = projected_aabb(&b, calib, None).unwrap_or(t);
                let j = |r: &mut _| 20.0 * (Rng::random::<f64>(r) - 0.5);
                Box2D::new(p.x1 + j(&mut rng), p.y1 + j(&mut rng), p.x2 + j(&mut rng), p.y2 + j(&mut rng))
            } else {
                t
            };
            if target.area() <= 0.0 || selection_gap(&b, calib) < SELECTION_MARGIN {
                continue;
            }
            match giou_gradient(&b, &target, calib) {
                Ok(g) if !g.non_differentiable => break (b, target),
                _ => continue,
            }
        };
        let g = giou_gradient(&b, &target, calib).expect("checked above");
        let mut analytic = g.grad;
        if let Some(k) = cfg.inject_bug {
            analytic[k % 7] = -analytic[k % 7];
        }
        let p = b.params();
        let numeric: [f64; 7] = std::array::from_fn(|k| {
            let eval = |delta: f64| {
                let mut q = p;
                q[k] += delta;
                giou_gradient(&Box3D::from_params(q), &target, calib)
                    .map(|r| r.giou)
                    .unwrap_or(f64::NAN)
            };
            (eval(cfg.step) - eval(-cfg.step)) / (2.0 * cfg.step)
        });
        let scale = analytic.iter().fold(1e-8f64, |m, a| m.max(a.abs()));
        let rel_error = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs() / scale)
            .fold(0.0, f64::max);
        let rel_error = if rel_error.is_nan() { f64::INFINITY } else { rel_error };
        out.push(GradientTrial {
            trial,
            giou: g.giou,
            analytic,
            numeric,
            rel_error,
            pass: rel_error < cfg.rel_tol,
        });
    }
    out
}
