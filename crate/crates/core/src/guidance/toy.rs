//! A pair of logistic objectness classifiers, one over point features and one
//! over pixel features, trained by full-batch gradient descent on the
//! guidance losses. Small enough to train in milliseconds, large enough to
//! show what the KL term does.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::losses::{focal_loss_logits, kl_guidance_logits, FocalParams};
use super::{merge_foreground_maps, scatter_indices, GuidanceError};
use crate::kitti_io::{BoxMask, PointSource, SyntheticScene};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Add the KL term toward the image-side map when training the point side.
    pub use_kl: bool,
    pub kl_weight: f64,
    pub focal: FocalParams,
    /// Pure-noise feature channels appended on both sides.
    pub noise_channels: usize,
    /// Standard deviation of the noise on the image-side foreground channel.
    pub image_noise: f64,
    /// Neighborhood radius for the point density feature, meters.
    pub density_radius: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.1,
            seed: 0,
            use_kl: true,
            kl_weight: 1.0,
            focal: FocalParams::default(),
            noise_channels: 2,
            image_noise: 0.8,
            density_radius: 0.5,
        }
    }
}

/// Training inputs derived from one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScene {
    /// Raw per-point features.
    pub point_features: Vec<Vec<f64>>,
    /// True foreground membership of each point.
    pub point_labels: Vec<bool>,
    /// Points that project into the image.
    pub visible: Vec<usize>,
    /// For each pixel of the region: the point that owns it.
    pub winners: Vec<usize>,
    /// For each pixel of the region: raw image features.
    pub pixel_features: Vec<Vec<f64>>,
    /// For each pixel of the region: the foreground map value.
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub scenes: Vec<ToyScene>,
}

/// Logistic classifier over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ToyClassifier {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias
            + x.iter()
                .enumerate()
                .map(|(c, v)| self.weights[c] * (v - self.mean[c]) / self.std[c])
                .sum::<f64>()
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.logit(x)).exp())
    }

    fn init(rows: &[&Vec<f64>], seed: u64, stream_id: u64) -> Self {
        let c = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; c];
        for r in rows {
            for k in 0..c {
                mean[k] += r[k] / n;
            }
        }
        let mut var = vec![0.0; c];
        for r in rows {
            for k in 0..c {
                var[k] += (r[k] - mean[k]).powi(2) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        let mut rng = stream(seed, &[stream_id]);
        let weights = (0..c).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self {
            weights,
            bias: 0.0,
            mean,
            std,
        }
    }

    fn step(&mut self, rows: &[&Vec<f64>], grad_logits: &[f64], lr: f64) {
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (x, g) in rows.iter().zip(grad_logits) {
            gb += g;
            for c in 0..gw.len() {
                gw[c] += g * (x[c] - self.mean[c]) / self.std[c];
            }
        }
        for c in 0..gw.len() {
            self.weights[c] -= lr * gw[c];
        }
        self.bias -= lr * gb;
    }
}

/// One row of the training curve. `box` is always absent here; the field
/// exists so curves share the loss-record layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEpoch {
    pub epoch: usize,
    #[serde(rename = "seg_P")]
    pub seg_p: f64,
    #[serde(rename = "seg_I")]
    pub seg_i: f64,
    pub kl: f64,
    #[serde(rename = "box")]
    pub box_: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTraining {
    pub image: ToyClassifier,
    pub point: ToyClassifier,
    /// The point-side classifier before training.
    pub initial_point: ToyClassifier,
    pub curve: Vec<ToyEpoch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyEvaluation {
    pub point_accuracy: f64,
    pub initial_point_accuracy: f64,
    /// Mean Bernoulli KL from the image-side map to the point-side map.
    pub kl_point_to_image: f64,
}

fn density(points: &[[f64; 3]], radius: f64) -> Vec<f64> {
    use std::collections::HashMap;
    let cell = |p: &[f64; 3]| {
        [0, 1, 2].map(|k| (p[k] / radius).floor() as i64)
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let r2 = radius * radius;
    points
        .iter()
        .map(|p| {
            let c = cell(p);
            let mut count = 0usize;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            count += bucket
                                .iter()
                                .filter(|&&j| {
                                    let q = points[j];
                                    (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>() <= r2
                                })
                                .count();
                        }
                    }
                }
            }
            (count as f64).ln()
        })
        .collect()
}

/// Derive features, region and targets from synthetic scenes. Point features
/// are height above ground, log local density, reflectance and noise; pixel
/// features are a noisy copy of the foreground map plus noise.
pub fn build_toy_dataset(scenes: &[SyntheticScene], config: &ToyConfig) -> ToyDataset {
    let scenes = scenes
        .iter()
        .enumerate()
        .map(|(s, scene)| {
            let mut rng = stream(config.seed, &[s as u64, 0x70]);
            let positions: Vec<[f64; 3]> = (0..scene.cloud.len())
                .map(|i| scene.calib.lidar_to_rect(scene.cloud.xyz(i)))
                .collect();
            let dens = density(&positions, config.density_radius);
            let point_features: Vec<Vec<f64>> = positions
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut f = vec![scene.ground_y - p[1], dens[i], scene.cloud.reflectance(i)];
                    f.extend((0..config.noise_channels).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    f
                })
                .collect();
            let point_labels = scene
                .point_sources
                .iter()
                .map(|s| matches!(s, PointSource::Object(_)))
                .collect();

            let (masks, boxes): (Vec<BoxMask>, Vec<_>) = scene
                .masks
                .iter()
                .zip(&scene.labels.objects)
                .filter_map(|(m, o)| m.clone().map(|m| (m, o.box2d)))
                .unzip();
            let fg = merge_foreground_maps(&masks, &boxes, scene.extent)
                .expect("synthetic masks fit their boxes");
            let owners = scatter_indices(&positions, &scene.calib, scene.extent);
            let mut winners = Vec::with_capacity(owners.len());
            let mut pixel_features = Vec::with_capacity(owners.len());
            let mut targets = Vec::with_capacity(owners.len());
            for (px, i) in &owners {
                let s_value = fg.get(*px).unwrap_or(0.0);
                let mut f = vec![s_value + config.image_noise * rng.sample::<f64, _>(StandardNormal)];
                f.extend((0..config.noise_channels).map(|_| rng.sample::<f64, _>(StandardNormal)));
                winners.push(*i);
                pixel_features.push(f);
                targets.push(s_value);
            }
            let visible = positions
                .iter()
                .enumerate()
                .filter(|(_, p)| {
                    let (u, v, d) = scene.calib.project(**p);
                    d > 0.0 && super::Pixel::containing(u, v, scene.extent).is_some()
                })
                .map(|(i, _)| i)
                .collect();
            ToyScene {
                point_features,
                point_labels,
                visible,
                winners,
                pixel_features,
                targets,
            }
        })
        .collect();
    ToyDataset { scenes }
}

pub fn train_toy_objectness(
    scenes: &[SyntheticScene],
    config: &ToyConfig,
) -> Result<ToyTraining, GuidanceError> {
    train_toy_on(&build_toy_dataset(scenes, config), config)
}

/// Train the image side with the focal loss on the foreground map, then the
/// point side with the focal loss plus, optionally, KL toward the trained
/// image side. Losses in the curve are measured before each update.
pub fn train_toy_on(data: &ToyDataset, config: &ToyConfig) -> Result<ToyTraining, GuidanceError> {
    if !config.lr.is_finite() || config.lr < 0.0 {
        return Err(GuidanceError::InvalidConfig(format!("learning rate {}", config.lr)));
    }
    let pixel_rows: Vec<&Vec<f64>> = data.scenes.iter().flat_map(|s| &s.pixel_features).collect();
    let targets: Vec<f64> = data.scenes.iter().flat_map(|s| s.targets.iter().copied()).collect();
    let point_rows_all: Vec<&Vec<f64>> = data.scenes.iter().flat_map(|s| &s.point_features).collect();
    let winner_rows: Vec<&Vec<f64>> = data
        .scenes
        .iter()
        .flat_map(|s| s.winners.iter().map(move |&i| &s.point_features[i]))
        .collect();

    let mut image = ToyClassifier::init(&pixel_rows, config.seed, 1);
    let mut point = ToyClassifier::init(&point_rows_all, config.seed, 2);
    let initial_point = point.clone();

    let mut seg_i = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let logits: Vec<f64> = pixel_rows.iter().map(|x| image.logit(x)).collect();
        let r = focal_loss_logits(&logits, &targets, &config.focal);
        if !r.loss.is_finite() {
            return Err(GuidanceError::DivergenceDetected {
                epoch,
                curve: Vec::new(),
            });
        }
        seg_i.push(r.loss);
        image.step(&pixel_rows, &r.grad, config.lr);
    }

    let reference: Vec<f64> = pixel_rows.iter().map(|x| image.prob(x)).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for (epoch, &seg_i) in seg_i.iter().enumerate() {
        let logits: Vec<f64> = winner_rows.iter().map(|x| point.logit(x)).collect();
        let focal = focal_loss_logits(&logits, &targets, &config.focal);
        let kl = kl_guidance_logits(&reference, &logits);
        let total = focal.loss + seg_i + if config.use_kl { config.kl_weight * kl.loss } else { 0.0 };
        if !total.is_finite() {
            return Err(GuidanceError::DivergenceDetected { epoch, curve });
        }
        curve.push(ToyEpoch {
            epoch,
            seg_p: focal.loss,
            seg_i,
            kl: kl.loss,
            box_: None,
            total,
        });
        let grad: Vec<f64> = if config.use_kl {
            focal
                .grad
                .iter()
                .zip(&kl.grad)
                .map(|(f, k)| f + config.kl_weight * k)
                .collect()
        } else {
            focal.grad
        };
        point.step(&winner_rows, &grad, config.lr);
    }
    Ok(ToyTraining {
        image,
        point,
        initial_point,
        curve,
    })
}

fn accuracy(model: &ToyClassifier, data: &ToyDataset) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in &data.scenes {
        for &i in &s.visible {
            let predicted = model.prob(&s.point_features[i]) >= 0.5;
            correct += usize::from(predicted == s.point_labels[i]);
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Point-side accuracy on visible points, before and after training, and the
/// point-to-image KL over the region, on (typically held-out) data.
pub fn evaluate_toy(training: &ToyTraining, data: &ToyDataset) -> ToyEvaluation {
    let mut reference = Vec::new();
    let mut logits = Vec::new();
    for s in &data.scenes {
        for (k, &i) in s.winners.iter().enumerate() {
            reference.push(training.image.prob(&s.pixel_features[k]));
            logits.push(training.point.logit(&s.point_features[i]));
        }
    }
    ToyEvaluation {
        point_accuracy: accuracy(&training.point, data),
        initial_point_accuracy: accuracy(&training.initial_point, data),
        kl_point_to_image: kl_guidance_logits(&reference, &logits).loss,
    }
}
