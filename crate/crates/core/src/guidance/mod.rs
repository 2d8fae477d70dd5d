//! Feature- and output-level guidance.
//!
//! Objectness maps hold per-pixel foreground probabilities, either dense over
//! the image or sparse over the pixels hit by projected points. Losses take
//! logits and return gradients with respect to them.

mod compose;
mod losses;
mod output;
mod toy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry3d::DEPTH_EPSILON;
use crate::kitti_io::{Box2D, BoxMask, Calibration, ImageExtent};

pub use compose::{compose_losses, LossBreakdown, LossMode, LossTerms, LossWeights};
pub use losses::{
    focal_loss, focal_loss_logits, kl_guidance, kl_guidance_logits, l2_feature_loss, FocalParams,
    LossGrad, PixelFeatureMap, SparseFeatureMap, PROB_CLAMP,
};
pub use output::{greedy_match_2d, output_level_loss, OutputLoss};
pub use toy::{
    build_toy_dataset, evaluate_toy, train_toy_objectness, train_toy_on, ToyClassifier,
    ToyConfig, ToyDataset, ToyEpoch, ToyEvaluation, ToyScene, ToyTraining,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("mask {index} does not fit its box: {detail}")]
    MaskShapeMismatch { index: usize, detail: String },
    #[error("feature maps have {left} and {right} channels")]
    ChannelMismatch { left: usize, right: usize },
    #[error("pixel ({row}, {col}) of the region is outside a map's support")]
    RegionOutsideSupport { row: u32, col: u32 },
    #[error("2D scores of the matched objects sum to zero")]
    ZeroScoreSum,
    #[error("2D box {0} has no score")]
    MissingScore(usize),
    #[error("match pair ({0}, {1}) is out of range")]
    BadPair(usize, usize),
    #[error("{0} is required in this mode")]
    MissingTerm(&'static str),
    #[error("training diverged at epoch {epoch}")]
    DivergenceDetected { epoch: usize, curve: Vec<ToyEpoch> },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry3d::GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub row: u32,
    pub col: u32,
}

impl Pixel {
    pub fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    /// The pixel containing image point `(u, v)`, if inside the extent.
    pub fn containing(u: f64, v: f64, extent: ImageExtent) -> Option<Self> {
        if u >= 0.0 && v >= 0.0 && u < extent.width as f64 && v < extent.height as f64 {
            Some(Self::new(v.floor() as u32, u.floor() as u32))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Values {
    Dense(Vec<f64>),
    Sparse(BTreeMap<Pixel, f64>),
}

/// Per-pixel foreground probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectnessMap {
    extent: ImageExtent,
    values: Values,
}

impl ObjectnessMap {
    pub fn zeros(extent: ImageExtent) -> Self {
        Self {
            extent,
            values: Values::Dense(vec![0.0; extent.pixel_count()]),
        }
    }

    /// Dense map from row-major values, clamped into `[0, 1]`.
    pub fn dense(extent: ImageExtent, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), extent.pixel_count(), "raster size");
        Self {
            extent,
            values: Values::Dense(values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()),
        }
    }

    pub fn sparse(extent: ImageExtent) -> Self {
        Self {
            extent,
            values: Values::Sparse(BTreeMap::new()),
        }
    }

    pub fn extent(&self) -> ImageExtent {
        self.extent
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.values, Values::Dense(_))
    }

    fn offset(&self, px: Pixel) -> Option<usize> {
        (px.row < self.extent.height && px.col < self.extent.width)
            .then(|| (px.row * self.extent.width + px.col) as usize)
    }

    /// Value at `px`, or `None` outside the support.
    pub fn get(&self, px: Pixel) -> Option<f64> {
        match &self.values {
            Values::Dense(v) => self.offset(px).map(|i| v[i]),
            Values::Sparse(m) => m.get(&px).copied(),
        }
    }

    /// Set a value (clamped into `[0, 1]`); sparse maps grow their support.
    pub fn set(&mut self, px: Pixel, value: f64) {
        let value = value.clamp(0.0, 1.0);
        let offset = self.offset(px).expect("pixel inside extent");
        match &mut self.values {
            Values::Dense(v) => v[offset] = value,
            Values::Sparse(m) => {
                m.insert(px, value);
            }
        }
    }

    /// Supported pixels in row-major order.
    pub fn support(&self) -> Vec<Pixel> {
        match &self.values {
            Values::Dense(_) => (0..self.extent.height)
                .flat_map(|r| (0..self.extent.width).map(move |c| Pixel::new(r, c)))
                .collect(),
            Values::Sparse(m) => m.keys().copied().collect(),
        }
    }

    pub fn support_len(&self) -> usize {
        match &self.values {
            Values::Dense(v) => v.len(),
            Values::Sparse(m) => m.len(),
        }
    }

    /// Values at `region`, failing on pixels outside the support.
    pub fn values_at(&self, region: &[Pixel]) -> Result<Vec<f64>, GuidanceError> {
        region
            .iter()
            .map(|&px| {
                self.get(px).ok_or(GuidanceError::RegionOutsideSupport {
                    row: px.row,
                    col: px.col,
                })
            })
            .collect()
    }

    /// Row-major dense raster (unsupported pixels are 0).
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.values {
            Values::Dense(v) => v.clone(),
            Values::Sparse(m) => {
                let mut out = vec![0.0; self.extent.pixel_count()];
                for (px, v) in m {
                    out[(px.row * self.extent.width + px.col) as usize] = *v;
                }
                out
            }
        }
    }
}

/// Pixel rectangle `[col0, col1) x [row0, row1)` of pixels whose centers lie
/// in `b`, clipped to the image.
fn pixel_span(b: &Box2D, extent: ImageExtent) -> (u32, u32, u32, u32) {
    let lo = |x: f64, max: u32| ((x - 0.5).ceil().max(0.0) as u32).min(max);
    let hi = |x: f64, max: u32| (((x - 0.5).floor() + 1.0).max(0.0) as u32).min(max);
    (
        lo(b.x1, extent.width),
        lo(b.y1, extent.height),
        hi(b.x2, extent.width),
        hi(b.y2, extent.height),
    )
}

/// Mask that fills a 2D box: the fallback when no segmentation exists.
pub fn box_fallback_mask(b: &Box2D, extent: ImageExtent) -> BoxMask {
    let (c0, r0, c1, r1) = pixel_span(b, extent);
    let (width, height) = (c1.saturating_sub(c0), r1.saturating_sub(r0));
    BoxMask {
        col0: c0,
        row0: r0,
        width,
        height,
        data: vec![1.0; (width * height) as usize],
    }
}

/// Merge per-box masks into one map by pixelwise maximum. Each mask must lie
/// within its box's pixel footprint (`floor(x1)..ceil(x2)`); parts outside the
/// image are dropped.
pub fn merge_foreground_maps(
    masks: &[BoxMask],
    boxes: &[Box2D],
    extent: ImageExtent,
) -> Result<ObjectnessMap, GuidanceError> {
    if masks.len() != boxes.len() {
        return Err(GuidanceError::MaskShapeMismatch {
            index: masks.len().min(boxes.len()),
            detail: format!("{} masks for {} boxes", masks.len(), boxes.len()),
        });
    }
    let mut out = vec![0.0f64; extent.pixel_count()];
    for (index, (m, b)) in masks.iter().zip(boxes).enumerate() {
        let mismatch = |detail: String| GuidanceError::MaskShapeMismatch { index, detail };
        if m.data.len() != (m.width * m.height) as usize {
            return Err(mismatch(format!(
                "{} values for a {}x{} raster",
                m.data.len(),
                m.width,
                m.height
            )));
        }
        let (c0, r0) = (m.col0 as f64, m.row0 as f64);
        let (c1, r1) = ((m.col0 + m.width) as f64, (m.row0 + m.height) as f64);
        if m.width > 0
            && m.height > 0
            && (c0 < b.x1.floor() || r0 < b.y1.floor() || c1 > b.x2.ceil() || r1 > b.y2.ceil())
        {
            return Err(mismatch(format!(
                "raster [{c0}, {c1}) x [{r0}, {r1}) leaves the box"
            )));
        }
        for r in 0..m.height {
            let row = m.row0 + r;
            if row >= extent.height {
                break;
            }
            for c in 0..m.width {
                let col = m.col0 + c;
                if col >= extent.width {
                    break;
                }
                let v = m.data[(r * m.width + c) as usize].clamp(0.0, 1.0);
                let slot = &mut out[(row * extent.width + col) as usize];
                *slot = f64::max(*slot, v);
            }
        }
    }
    Ok(ObjectnessMap::dense(extent, out))
}

/// Projected points: a sparse map, the occupied pixels (region `𝒜`) in
/// row-major order, and which point won each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub map: ObjectnessMap,
    pub region: Vec<Pixel>,
    pub winners: Vec<usize>,
}

/// Pixel owner of each point under the nearest-depth rule, ignoring values.
pub fn scatter_indices(
    positions: &[[f64; 3]],
    calib: &Calibration,
    extent: ImageExtent,
) -> BTreeMap<Pixel, usize> {
    let mut owner: BTreeMap<Pixel, (f64, usize)> = BTreeMap::new();
    for (i, p) in positions.iter().enumerate() {
        let (u, v, depth) = calib.project(*p);
        if depth <= DEPTH_EPSILON {
            continue;
        }
        let Some(px) = Pixel::containing(u, v, extent) else {
            continue;
        };
        owner
            .entry(px)
            .and_modify(|e| {
                if depth < e.0 {
                    *e = (depth, i);
                }
            })
            .or_insert((depth, i));
    }
    owner.into_iter().map(|(px, (_, i))| (px, i)).collect()
}

/// Scatter per-point probabilities onto the image; the nearest point wins a
/// shared pixel (the lower index on equal depth).
pub fn scatter_points(
    values: &[f64],
    positions: &[[f64; 3]],
    calib: &Calibration,
    extent: ImageExtent,
) -> Scatter {
    assert_eq!(values.len(), positions.len());
    let owners = scatter_indices(positions, calib, extent);
    let mut map = ObjectnessMap::sparse(extent);
    let mut region = Vec::with_capacity(owners.len());
    let mut winners = Vec::with_capacity(owners.len());
    for (px, i) in owners {
        map.set(px, values[i]);
        region.push(px);
        winners.push(i);
    }
    Scatter {
        map,
        region,
        winners,
    }
}
