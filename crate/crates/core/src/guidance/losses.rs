use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GuidanceError, ObjectnessMap, Pixel};
use crate::kitti_io::ImageExtent;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside losses;
/// the gradient is zero where the clamp is active.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FocalParams {
    pub gamma: f64,
    /// Weight of positive targets; negatives get `1 - alpha`.
    pub alpha: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.25,
        }
    }
}

/// Mean loss over a region and its gradient with respect to each logit.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl LossGrad {
    fn zero(n: usize) -> Self {
        Self {
            loss: 0.0,
            grad: vec![0.0; n],
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Clamped probability and whether it sits strictly inside the clamp range.
fn clamped(p: f64) -> (f64, bool) {
    let q = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (q, q == p && p > PROB_CLAMP && p < 1.0 - PROB_CLAMP)
}

/// Focal loss on logits against targets binarized at 0.5.
pub fn focal_loss_logits(logits: &[f64], targets: &[f64], params: &FocalParams) -> LossGrad {
    assert_eq!(logits.len(), targets.len());
    let n = logits.len();
    if n == 0 {
        return LossGrad::zero(0);
    }
    let g = params.gamma;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (&z, &t) in logits.iter().zip(targets) {
        let (p, live) = clamped(sigmoid(z));
        let (loss, d) = if t >= 0.5 {
            let a = params.alpha;
            let q = 1.0 - p;
            (
                -a * q.powf(g) * p.ln(),
                a * (g * p * q.powf(g) * p.ln() - q.powf(g + 1.0)),
            )
        } else {
            let a = 1.0 - params.alpha;
            let q = 1.0 - p;
            (
                -a * p.powf(g) * q.ln(),
                -a * (g * p.powf(g) * q * q.ln() - p.powf(g + 1.0)),
            )
        };
        total += loss;
        grad.push(if live { d / n as f64 } else { 0.0 });
    }
    LossGrad {
        loss: total / n as f64,
        grad,
    }
}

/// Focal loss of a predicted map against a target map over `region`; the
/// gradient is with respect to the logits of `pred` at each region pixel.
pub fn focal_loss(
    pred: &ObjectnessMap,
    target: &ObjectnessMap,
    region: &[Pixel],
    params: &FocalParams,
) -> Result<LossGrad, GuidanceError> {
    let p = pred.values_at(region)?;
    let t = target.values_at(region)?;
    let logits: Vec<f64> = p.iter().map(|&v| logit(v)).collect();
    Ok(focal_loss_logits(&logits, &t, params))
}

/// Mean Bernoulli KL(q || sigmoid(z)) and its gradient with respect to `z`.
pub fn kl_guidance_logits(reference: &[f64], logits: &[f64]) -> LossGrad {
    assert_eq!(reference.len(), logits.len());
    let n = logits.len();
    if n == 0 {
        return LossGrad::zero(0);
    }
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (&q, &z) in reference.iter().zip(logits) {
        let (q, _) = clamped(q);
        let (p, live) = clamped(sigmoid(z));
        total += q * (q / p).ln() + (1.0 - q) * ((1.0 - q) / (1.0 - p)).ln();
        grad.push(if live { (p - q) / n as f64 } else { 0.0 });
    }
    LossGrad {
        loss: total / n as f64,
        grad,
    }
}

/// KL from the image-side map to the point-side map over `region`. The image
/// side is a fixed reference; the gradient is for the point-side logits.
pub fn kl_guidance(
    c_image: &ObjectnessMap,
    c_points: &ObjectnessMap,
    region: &[Pixel],
) -> Result<LossGrad, GuidanceError> {
    let q = c_image.values_at(region)?;
    let p = c_points.values_at(region)?;
    let logits: Vec<f64> = p.iter().map(|&v| logit(v)).collect();
    Ok(kl_guidance_logits(&q, &logits))
}

/// Dense `H x W x C` features, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelFeatureMap {
    pub extent: ImageExtent,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl PixelFeatureMap {
    pub fn new(extent: ImageExtent, channels: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), extent.pixel_count() * channels);
        Self {
            extent,
            channels,
            data,
        }
    }

    pub fn at(&self, px: Pixel) -> &[f64] {
        let i = (px.row * self.extent.width + px.col) as usize * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Features at a sparse set of pixels, such as projected point features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFeatureMap {
    pub channels: usize,
    pub values: BTreeMap<Pixel, Vec<f64>>,
}

/// Mean over `region` of the Euclidean distance between image features and
/// projected point features.
pub fn l2_feature_loss(
    f_image: &PixelFeatureMap,
    f_points: &SparseFeatureMap,
    region: &[Pixel],
) -> Result<f64, GuidanceError> {
    if f_image.channels != f_points.channels {
        return Err(GuidanceError::ChannelMismatch {
            left: f_image.channels,
            right: f_points.channels,
        });
    }
    if region.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &px in region {
        if px.row >= f_image.extent.height || px.col >= f_image.extent.width {
            return Err(GuidanceError::RegionOutsideSupport {
                row: px.row,
                col: px.col,
            });
        }
        let b = f_points
            .values
            .get(&px)
            .ok_or(GuidanceError::RegionOutsideSupport {
                row: px.row,
                col: px.col,
            })?;
        if b.len() != f_points.channels {
            return Err(GuidanceError::ChannelMismatch {
                left: f_points.channels,
                right: b.len(),
            });
        }
        let a = f_image.at(px);
        total += a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
    }
    Ok(total / region.len() as f64)
}
