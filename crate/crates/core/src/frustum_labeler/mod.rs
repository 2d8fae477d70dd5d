//! Initial 3D labels from 2D boxes: cut the frustum of each box out of the
//! point cloud, strip the ground, and fit an oriented box under a class prior.

mod fit;
mod ground;

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::kitti_io::{Box2D, Calibration, FrameLabelSet, PointCloud, Provenance};

pub use fit::{fit_box_heuristic, ClassPrior, FitConfig, Rejection};
pub use ground::{remove_ground, GroundConfig, Plane};

/// Points of one frame whose projection falls inside a (margin-expanded) 2D box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrustumSegment {
    pub source: Box2D,
    /// Indices into the frame's point cloud.
    pub members: Vec<usize>,
    /// Member positions in the rectified camera frame, parallel to `members`.
    pub points: Vec<[f64; 3]>,
    /// Member pixel coordinates, parallel to `members`.
    pub pixels: Vec<[f64; 2]>,
    pub ground_removed: bool,
    pub ground_plane: Option<Plane>,
}

impl FrustumSegment {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub(crate) fn retain(&mut self, mut keep: impl FnMut(&[f64; 3]) -> bool) {
        let mut k = 0;
        for i in 0..self.members.len() {
            if keep(&self.points[i]) {
                self.members[k] = self.members[i];
                self.points[k] = self.points[i];
                self.pixels[k] = self.pixels[i];
                k += 1;
            }
        }
        self.members.truncate(k);
        self.points.truncate(k);
        self.pixels.truncate(k);
    }
}

pub fn extract_frustum(
    cloud: &PointCloud,
    box2d: &Box2D,
    calib: &Calibration,
    margin: f64,
) -> FrustumSegment {
    let region = box2d.expanded(margin.max(0.0));
    let mut members = Vec::new();
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for i in 0..cloud.len() {
        let p = calib.lidar_to_rect(cloud.xyz(i));
        let (u, v, depth) = calib.project(p);
        if depth > 0.0 && p[2] > 0.0 && region.contains(u, v) {
            members.push(i);
            points.push(p);
            pixels.push([u, v]);
        }
    }
    FrustumSegment {
        source: *box2d,
        members,
        points,
        pixels,
        ground_removed: false,
        ground_plane: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrustumConfig {
    /// Frustum expansion in pixels.
    pub margin: f64,
    pub ground: GroundConfig,
    pub fit: FitConfig,
    pub priors: BTreeMap<String, ClassPrior>,
    pub seed: u64,
}

impl Default for FrustumConfig {
    fn default() -> Self {
        let mut priors = BTreeMap::new();
        priors.insert("Car".to_string(), ClassPrior::car());
        Self {
            margin: 2.0,
            ground: GroundConfig::default(),
            fit: FitConfig::default(),
            priors,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub too_few_points: usize,
    pub degenerate_fit: usize,
    pub implausible_dims: usize,
}

impl RejectionCounts {
    pub fn total(&self) -> usize {
        self.too_few_points + self.degenerate_fit + self.implausible_dims
    }

    fn record(&mut self, r: Rejection) {
        match r {
            Rejection::TooFewPoints => self.too_few_points += 1,
            Rejection::DegenerateFit => self.degenerate_fit += 1,
            Rejection::ImplausibleDims => self.implausible_dims += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialLabelReport {
    pub frame_id: String,
    pub attempted: usize,
    pub fitted: usize,
    pub rejections: RejectionCounts,
}

impl InitialLabelReport {
    pub fn empty(frame_id: impl Into<String>) -> Self {
        Self {
            frame_id: frame_id.into(),
            attempted: 0,
            fitted: 0,
            rejections: RejectionCounts::default(),
        }
    }

    pub fn merge(&mut self, other: &InitialLabelReport) {
        self.attempted += other.attempted;
        self.fitted += other.fitted;
        self.rejections.too_few_points += other.rejections.too_few_points;
        self.rejections.degenerate_fit += other.rejections.degenerate_fit;
        self.rejections.implausible_dims += other.rejections.implausible_dims;
    }
}

/// Label one frame. Objects without a prior for their class, and `DontCare`
/// regions, are passed through untouched and not counted as attempts.
pub fn label_frame(
    cloud: &PointCloud,
    label2d: &FrameLabelSet,
    calib: &Calibration,
    config: &FrustumConfig,
) -> (FrameLabelSet, InitialLabelReport) {
    let mut out = FrameLabelSet::new(label2d.frame_id.clone(), Provenance::Initial);
    let mut report = InitialLabelReport::empty(label2d.frame_id.clone());
    let key = crate::rng::frame_key(&label2d.frame_id);
    let sensor = calib.sensor_origin();
    for (i, obj) in label2d.objects.iter().enumerate() {
        let mut labeled = obj.clone();
        labeled.box3d = None;
        let prior = match config.priors.get(&obj.class) {
            Some(p) if !obj.is_dont_care() => p,
            _ => {
                out.objects.push(labeled);
                continue;
            }
        };
        report.attempted += 1;
        let segment = extract_frustum(cloud, &obj.box2d, calib, config.margin);
        let ground_cfg = GroundConfig {
            seed: crate::rng::stream(config.seed, &[key, i as u64]).next_u64(),
            ..config.ground
        };
        let segment = remove_ground(&segment, &ground_cfg);
        match fit_box_heuristic(&segment, prior, &config.fit, sensor) {
            Ok(b) => {
                report.fitted += 1;
                labeled.box3d = Some(b);
            }
            Err(r) => {
                log::debug!("{}: object {i} rejected ({r:?})", label2d.frame_id);
                report.rejections.record(r);
            }
        }
        out.objects.push(labeled);
    }
    (out, report)
}
