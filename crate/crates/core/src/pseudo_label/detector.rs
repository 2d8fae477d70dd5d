use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{greedy_pairs, IouKind};
use crate::geometry3d::{iou_3d, projected_aabb};
use crate::kitti_io::{Box2D, Box3D, Calibration, FrameLabelSet, LabeledObject, Provenance};
use crate::rng::{frame_key, stream};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("detector failed in round {round}: {message}")]
pub struct DetectorFailure {
    pub round: u32,
    pub message: String,
}

/// A 3D detector that is retrained on the current labels and then predicts
/// scored boxes for every training frame.
pub trait Detector {
    fn predict(
        &mut self,
        round: u32,
        training: &[FrameLabelSet],
    ) -> Result<Vec<FrameLabelSet>, DetectorFailure>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatedDetectorConfig {
    /// Fraction of a training label's error reproduced in the prediction.
    pub label_memory: f64,
    /// Noise scale in metres for location.
    pub loc_sigma: f64,
    /// Noise scale in metres for dimensions.
    pub dim_sigma: f64,
    pub yaw_sigma: f64,
    /// Noise multiplier for objects without a training label.
    pub unlabeled_scale: f64,
    pub miss_rate: f64,
    pub duplicate_rate: f64,
    /// Expected false positives per frame.
    pub false_positive_rate: f64,
    /// Score is `logistic(score_bias - score_slope * (1 - IoU3D) + score_noise * z)`.
    pub score_bias: f64,
    pub score_slope: f64,
    pub score_noise: f64,
    /// Fail with [`DetectorFailure`] when asked for this round.
    pub fail_at_round: Option<u32>,
    pub seed: u64,
}

impl Default for SimulatedDetectorConfig {
    fn default() -> Self {
        Self {
            label_memory: 0.35,
            loc_sigma: 0.08,
            dim_sigma: 0.04,
            yaw_sigma: 0.03,
            unlabeled_scale: 2.0,
            miss_rate: 0.05,
            duplicate_rate: 0.1,
            false_positive_rate: 0.3,
            score_bias: 4.0,
            score_slope: 8.0,
            score_noise: 0.5,
            fail_at_round: None,
            seed: 0,
        }
    }
}

/// Stand-in for a trained detector. It knows the hidden ground truth and
/// predicts each object as the truth plus a share of its training label's
/// error plus fixed per-object noise, so prediction quality tracks label
/// quality. Random draws are keyed by (frame, object), not by round.
#[derive(Debug, Clone)]
pub struct SimulatedDetector {
    frames: BTreeMap<String, (FrameLabelSet, Calibration)>,
    cfg: SimulatedDetectorConfig,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn wrap(a: f64) -> f64 {
    crate::kitti_io::normalize_angle(a)
}

/// Parameters of the same footprint as `b` (quarter turns with length and
/// width exchanged on odd turns) whose yaw is nearest to `reference`.
fn equivalent_closest_to(b: &Box3D, reference: &Box3D) -> [f64; 7] {
    let p = b.params();
    (0..4)
        .map(|k| {
            let mut q = p;
            q[6] = wrap(p[6] + k as f64 * std::f64::consts::FRAC_PI_2);
            if k % 2 == 1 {
                q.swap(4, 5);
            }
            q
        })
        .min_by(|a, c| {
            wrap(a[6] - reference.yaw)
                .abs()
                .total_cmp(&wrap(c[6] - reference.yaw).abs())
        })
        .expect("four candidates")
}

impl SimulatedDetector {
    /// `frames` pairs each frame's hidden ground truth with its calibration.
    pub fn new(frames: Vec<(FrameLabelSet, Calibration)>, cfg: SimulatedDetectorConfig) -> Self {
        Self {
            frames: frames.into_iter().map(|(g, c)| (g.frame_id.clone(), (g, c))).collect(),
            cfg,
        }
    }

    fn score(&self, pred: &Box3D, gt: Option<&Box3D>, z: f64) -> f64 {
        let err = gt.map_or(1.0, |g| 1.0 - iou_3d(pred, g));
        logistic(self.cfg.score_bias - self.cfg.score_slope * err + self.cfg.score_noise * z)
    }

    fn predict_frame(&self, training: &FrameLabelSet) -> FrameLabelSet {
        let c = &self.cfg;
        let mut out = FrameLabelSet::new(training.frame_id.clone(), Provenance::Prediction);
        let Some((gt, calib)) = self.frames.get(&training.frame_id) else {
            return out;
        };
        let key = frame_key(&training.frame_id);
        let gts: Vec<&LabeledObject> = gt.cared().filter(|o| o.box3d.is_some()).collect();
        let labels: Vec<&LabeledObject> = training.cared().filter(|o| o.box3d.is_some()).collect();
        let mut label_of: Vec<Option<Box3D>> = vec![None; gts.len()];
        for (i, j, _) in greedy_pairs(&labels, &gts, IouKind::Bev) {
            label_of[j] = labels[i].box3d;
        }
        let push = |out: &mut FrameLabelSet, class: &str, b: Box3D| {
            let box2d = projected_aabb(&b, calib, None).unwrap_or(Box2D::new(0.0, 0.0, 0.0, 0.0));
            out.objects.push(LabeledObject::new(class, box2d).with_box3d(b));
        };
        for (j, g) in gts.iter().enumerate() {
            let truth = g.box3d.expect("filtered above");
            let mut rng = stream(c.seed, &[key, j as u64]);
            let missed = rng.random::<f64>() < c.miss_rate;
            let n: [f64; 7] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let z: f64 = rng.sample(StandardNormal);
            let dup = rng.random::<f64>() < c.duplicate_rate;
            let dn: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if missed {
                continue;
            }
            let t = truth.params();
            let (base, scale) = match label_of[j] {
                Some(l) => {
                    let l = equivalent_closest_to(&l, &truth);
                    let mut b: [f64; 7] = std::array::from_fn(|k| t[k] + c.label_memory * (l[k] - t[k]));
                    b[6] = t[6] + c.label_memory * wrap(l[6] - t[6]);
                    (b, 1.0)
                }
                None => (t, c.unlabeled_scale),
            };
            let sig = [c.loc_sigma, 0.3 * c.loc_sigma, c.loc_sigma, c.dim_sigma, c.dim_sigma, c.dim_sigma, c.yaw_sigma];
            let mut p: [f64; 7] = std::array::from_fn(|k| base[k] + scale * sig[k] * n[k]);
            for d in &mut p[3..6] {
                *d = d.max(0.3);
            }
            p[6] = wrap(p[6]);
            let mut b = Box3D::from_params(p);
            b.score = Some(self.score(&b, Some(&truth), z));
            push(&mut out, &g.class, b);
            if dup {
                let mut q = p;
                q[0] += 0.4 * dn[0];
                q[2] += 0.4 * dn[1];
                q[6] = wrap(q[6] + 0.1 * dn[2]);
                let mut d = Box3D::from_params(q);
                d.score = Some(0.9 * self.score(&d, Some(&truth), z));
                push(&mut out, &g.class, d);
            }
        }
        let mut rng = stream(c.seed, &[key, u64::MAX]);
        let whole = c.false_positive_rate.floor() as usize;
        let n_fp = whole + usize::from(rng.random::<f64>() < c.false_positive_rate - whole as f64);
        for _ in 0..n_fp {
            let x: f64 = rng.random_range(-10.0..10.0);
            let z: f64 = rng.random_range(8.0..40.0);
            let yaw: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let mut b = Box3D::new([x, gts.first().map_or(1.65, |g| g.box3d.unwrap().location[1]), z], 1.5, 1.6, 3.9, yaw);
            let nearest = gts
                .iter()
                .filter_map(|g| g.box3d)
                .max_by(|a, c| iou_3d(&b, a).total_cmp(&iou_3d(&b, c)));
            b.score = Some(self.score(&b, nearest.as_ref(), rng.sample(StandardNormal)));
            push(&mut out, "Car", b);
        }
        out
    }
}

impl Detector for SimulatedDetector {
    fn predict(
        &mut self,
        round: u32,
        training: &[FrameLabelSet],
    ) -> Result<Vec<FrameLabelSet>, DetectorFailure> {
        if self.cfg.fail_at_round == Some(round) {
            return Err(DetectorFailure {
                round,
                message: "injected failure".into(),
            });
        }
        Ok(training.iter().map(|t| self.predict_frame(t)).collect())
    }
}
