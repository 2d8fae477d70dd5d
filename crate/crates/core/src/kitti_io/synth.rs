//! Desk-scale synthetic scenes in the benchmark layout.
//!
//! Cars are boxes standing on a level ground plane. The LiDAR sees the side
//! faces that point toward it plus the roof; side faces start
//! `ground_clearance` above the ground. Ground returns, uniform clutter and
//! optional Gaussian point noise complete the cloud.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Box2D, Box3D, Calibration, FormatError, FrameLabelSet, ImageExtent, LabeledObject,
    PointCloud, Provenance, DONT_CARE,
};
use super::{write_calibration, write_label_file, write_mask_pgm, write_point_cloud};
use crate::geometry3d::{
    bev_intersection_area, bev_polygon, convex_contains, convex_hull, project_corners,
    projected_aabb,
};
use crate::rng::stream;

const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Which generator produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointSource {
    Object(usize),
    Ground,
    Clutter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    pub extent: ImageExtent,
    pub calib: Calibration,
    /// Mounting height of the LiDAR above the ground, meters.
    pub lidar_height: f64,
    /// Camera-frame depth range for object centers, meters.
    pub depth_range: [f64; 2],
    pub lateral_range: [f64; 2],
    /// Minimum BEV gap between boxes, meters.
    pub bev_margin: f64,
    pub height_range: [f64; 2],
    pub width_range: [f64; 2],
    pub length_range: [f64; 2],
    /// Surface samples for an object 10 m away; falls off with squared range.
    pub points_at_10m: f64,
    pub min_object_points: usize,
    pub max_object_points: usize,
    pub ground_points: usize,
    pub clutter_points: usize,
    /// Gaussian noise on every point coordinate, meters.
    pub point_noise: f64,
    /// Probability of dropping each object surface sample.
    pub point_dropout: f64,
    /// Gaussian jitter on 2D box corners, pixels.
    pub pixel_jitter: f64,
    pub ground_clearance: f64,
    pub dontcare_regions: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            min_objects: 2,
            max_objects: 5,
            extent: ImageExtent::kitti(),
            calib: Calibration::kitti_like(),
            lidar_height: 1.73,
            depth_range: [6.0, 40.0],
            lateral_range: [-12.0, 12.0],
            bev_margin: 1.0,
            height_range: [1.4, 1.7],
            width_range: [1.55, 1.9],
            length_range: [3.5, 4.6],
            points_at_10m: 900.0,
            min_object_points: 16,
            max_object_points: 2500,
            ground_points: 3000,
            clutter_points: 150,
            point_noise: 0.0,
            point_dropout: 0.0,
            pixel_jitter: 0.0,
            ground_clearance: 0.25,
            dontcare_regions: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |msg: &str| Err(FormatError::InvalidConfig(msg.to_string()));
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if self.min_objects > self.max_objects {
            return bad("min_objects > max_objects");
        }
        if self.extent.width == 0 || self.extent.height == 0 {
            return bad("image extent must be positive");
        }
        for (name, r) in [
            ("depth_range", self.depth_range),
            ("lateral_range", self.lateral_range),
            ("height_range", self.height_range),
            ("width_range", self.width_range),
            ("length_range", self.length_range),
        ] {
            if !range_ok(r) {
                return bad(&format!("{name} is empty"));
            }
        }
        if self.height_range[0] <= 0.0 || self.width_range[0] <= 0.0 || self.length_range[0] <= 0.0
        {
            return bad("box dimensions must be positive");
        }
        if self.depth_range[0] <= 1.0 {
            return bad("depth_range must start beyond 1 m");
        }
        if !(0.0..1.0).contains(&self.point_dropout) {
            return bad("point_dropout must be in [0, 1)");
        }
        if self.point_noise < 0.0 || self.pixel_jitter < 0.0 || self.bev_margin < 0.0 {
            return bad("noise levels and margins must be non-negative");
        }
        if self.ground_clearance < 0.0 || self.ground_clearance >= self.height_range[0] {
            return bad("ground_clearance must be below the smallest box height");
        }
        Ok(())
    }

    /// Camera-frame `y` of the ground plane (the camera is assumed level).
    pub fn ground_y(&self) -> f64 {
        self.calib.lidar_to_rect([0.0, 0.0, -self.lidar_height])[1]
    }
}

/// Foreground mask of one object, placed at pixel `(col0, row0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxMask {
    pub col0: u32,
    pub row0: u32,
    pub width: u32,
    pub height: u32,
    /// Row-major values in `[0, 1]`.
    pub data: Vec<f64>,
}

impl BoxMask {
    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.data[(row * self.width + col) as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    /// Ground truth with 3D boxes; 2D box scores carry the simulated 2D
    /// detector confidence at each object center.
    pub labels: FrameLabelSet,
    pub cloud: PointCloud,
    pub calib: Calibration,
    pub extent: ImageExtent,
    /// One entry per label object (`None` for `DontCare`).
    pub masks: Vec<Option<BoxMask>>,
    pub point_sources: Vec<PointSource>,
    pub ground_y: f64,
}

/// The files of one frame in a benchmark-layout split.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFiles {
    /// 2D annotations; the score column holds the 2D detector confidence.
    pub label_2: String,
    pub calib: String,
    pub velodyne: Vec<u8>,
    /// Pixelwise maximum of the object masks, as binary PGM.
    pub fg_mask: Vec<u8>,
    /// Hidden 3D ground truth.
    pub gt_3d: String,
}

impl SyntheticScene {
    pub fn foreground_raster(&self) -> Vec<f64> {
        let w = self.extent.width;
        let mut out = vec![0.0f64; self.extent.pixel_count()];
        for m in self.masks.iter().flatten() {
            for r in 0..m.height {
                for c in 0..m.width {
                    let (row, col) = (m.row0 + r, m.col0 + c);
                    if row < self.extent.height && col < w {
                        let slot = &mut out[(row * w + col) as usize];
                        *slot = slot.max(m.get(r, c));
                    }
                }
            }
        }
        out
    }

    pub fn to_files(&self) -> Result<SceneFiles, FormatError> {
        let mut annos = self.labels.clone();
        for o in &mut annos.objects {
            o.box3d = None;
        }
        Ok(SceneFiles {
            label_2: write_label_file(&annos, false)?,
            calib: write_calibration(&self.calib),
            velodyne: write_point_cloud(&self.cloud),
            fg_mask: write_mask_pgm(self.extent, &self.foreground_raster()),
            gt_3d: write_label_file(&self.labels, true)?,
        })
    }
}

/// Seed of frame `index` in a split generated with `run_seed`.
pub fn scene_seed(run_seed: u64, index: usize) -> u64 {
    use rand::RngCore;
    stream(run_seed, &[index as u64]).next_u64()
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn inflated(b: &Box3D, margin: f64) -> Box3D {
    let mut out = *b;
    out.dims.l += 2.0 * margin;
    out.dims.w += 2.0 * margin;
    out
}

fn place_boxes(
    rng: &mut ChaCha8Rng,
    cfg: &SceneConfig,
    count: usize,
    ground_y: f64,
) -> Result<Vec<Box3D>, FormatError> {
    let mut boxes: Vec<Box3D> = Vec::with_capacity(count);
    let mut attempts = 0;
    while boxes.len() < count {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(FormatError::ConfigInfeasible {
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
        let z = uniform(rng, cfg.depth_range);
        let x = uniform(rng, cfg.lateral_range);
        let h = uniform(rng, cfg.height_range);
        let w = uniform(rng, cfg.width_range);
        let l = uniform(rng, cfg.length_range);
        let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let b = Box3D::new([x, ground_y, z], h, w, l, yaw);

        let corners = project_corners(&b, &cfg.calib);
        if corners.0.iter().any(|p| p.depth < 1.0) {
            continue;
        }
        if !corners
            .0
            .iter()
            .any(|p| cfg.extent.contains(p.u, p.v))
        {
            continue;
        }
        let candidate = inflated(&b, cfg.bev_margin / 2.0);
        if boxes
            .iter()
            .any(|o| bev_intersection_area(&inflated(o, cfg.bev_margin / 2.0), &candidate) > 0.0)
        {
            continue;
        }
        boxes.push(b);
    }
    Ok(boxes)
}

/// Visible-surface samples of one box, in the camera frame.
fn sample_surface(
    rng: &mut ChaCha8Rng,
    b: &Box3D,
    sensor: [f64; 3],
    count: usize,
    clearance: f64,
) -> Vec<[f64; 3]> {
    let foot = bev_polygon(b);
    let [_, bottom, _] = b.location;
    let top = bottom - b.dims.h;
    let side_height = b.dims.h - clearance;
    // (kind, weight): kind 0..4 side faces, 4 roof
    let mut faces: Vec<(usize, f64)> = Vec::new();
    for k in 0..4 {
        let (a, c) = (foot[k], foot[(k + 1) % 4]);
        let mid = [(a[0] + c[0]) / 2.0, (a[1] + c[1]) / 2.0];
        // Outward normal of a counter-clockwise polygon edge.
        let normal = [c[1] - a[1], -(c[0] - a[0])];
        let to_sensor = [sensor[0] - mid[0], sensor[2] - mid[1]];
        if normal[0] * to_sensor[0] + normal[1] * to_sensor[1] > 0.0 {
            let len = ((c[0] - a[0]).powi(2) + (c[1] - a[1]).powi(2)).sqrt();
            faces.push((k, len * side_height));
        }
    }
    if sensor[1] < top {
        faces.push((4, b.dims.l * b.dims.w));
    }
    let total: f64 = faces.iter().map(|f| f.1).sum();
    let (s, c) = b.yaw.sin_cos();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = rng.random_range(0.0..total);
        let mut kind = faces[faces.len() - 1].0;
        for &(k, wgt) in &faces {
            if pick < wgt {
                kind = k;
                break;
            }
            pick -= wgt;
        }
        if kind == 4 {
            let lx = rng.random_range(-0.5..0.5) * b.dims.l;
            let lz = rng.random_range(-0.5..0.5) * b.dims.w;
            out.push([
                b.location[0] + c * lx + s * lz,
                top,
                b.location[2] - s * lx + c * lz,
            ]);
        } else {
            let (a, e) = (foot[kind], foot[(kind + 1) % 4]);
            let t: f64 = rng.random_range(0.0..1.0);
            let y = rng.random_range(top..=(bottom - clearance));
            out.push([a[0] + t * (e[0] - a[0]), y, a[1] + t * (e[1] - a[1])]);
        }
    }
    out
}

fn segments_cross(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let orient = |o: [f64; 2], x: [f64; 2], y: [f64; 2]| {
        (x[0] - o[0]) * (y[1] - o[1]) - (x[1] - o[1]) * (y[0] - o[0])
    };
    let (d1, d2) = (orient(a, b, p), orient(a, b, q));
    let (d3, d4) = (orient(p, q, a), orient(p, q, b));
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

/// Occlusion level from BEV rays: fraction of rays from the sensor to the
/// footprint corners and center that pass through another footprint.
fn occlusion_level(index: usize, boxes: &[Box3D], sensor: [f64; 2]) -> u8 {
    let b = &boxes[index];
    let c = b.bev_center();
    let mut targets: Vec<[f64; 2]> = bev_polygon(b)
        .iter()
        .map(|p| [0.98 * p[0] + 0.02 * c[0], 0.98 * p[1] + 0.02 * c[1]])
        .collect();
    targets.push(c);
    let blocked = targets
        .iter()
        .filter(|t| {
            boxes.iter().enumerate().any(|(j, o)| {
                if j == index {
                    return false;
                }
                let poly = bev_polygon(o);
                (0..4).any(|k| segments_cross(sensor, **t, poly[k], poly[(k + 1) % 4]))
            })
        })
        .count();
    let frac = blocked as f64 / targets.len() as f64;
    if frac == 0.0 {
        0
    } else if frac <= 0.4 {
        1
    } else {
        2
    }
}

fn rasterize_silhouette(
    b: &Box3D,
    box2d: &Box2D,
    calib: &Calibration,
    extent: ImageExtent,
) -> BoxMask {
    let pts: Vec<[f64; 2]> = project_corners(b, calib)
        .0
        .iter()
        .filter(|p| p.valid)
        .map(|p| [p.u, p.v])
        .collect();
    let hull = convex_hull(&pts);
    let col0 = box2d.x1.floor().max(0.0) as u32;
    let row0 = box2d.y1.floor().max(0.0) as u32;
    let col1 = (box2d.x2.ceil() as u32).min(extent.width).max(col0);
    let row1 = (box2d.y2.ceil() as u32).min(extent.height).max(row0);
    let (width, height) = (col1 - col0, row1 - row0);
    let mut data = Vec::with_capacity((width * height) as usize);
    for r in row0..row1 {
        for c in col0..col1 {
            let (u, v) = (c as f64 + 0.5, r as f64 + 0.5);
            let inside = box2d.contains(u, v) && convex_contains(&hull, [u, v]);
            data.push(if inside { 1.0 } else { 0.0 });
        }
    }
    BoxMask {
        col0,
        row0,
        width,
        height,
        data,
    }
}

/// Build one scene. Equal `(seed, config)` give bit-identical scenes.
pub fn generate_synthetic_scene(seed: u64, cfg: &SceneConfig) -> Result<SyntheticScene, FormatError> {
    cfg.validate()?;
    let mut rng = stream(seed, &[0]);
    let ground_y = cfg.ground_y();
    let sensor = cfg.calib.sensor_origin();
    let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
    let boxes = place_boxes(&mut rng, cfg, count, ground_y)?;
    let noise = Normal::new(0.0, cfg.point_noise.max(f64::MIN_POSITIVE)).expect("finite std");
    let jitter = Normal::new(0.0, cfg.pixel_jitter.max(f64::MIN_POSITIVE)).expect("finite std");

    let mut rect_points: Vec<([f64; 3], f32, PointSource)> = Vec::new();
    let mut labels = FrameLabelSet::new(super::frame_id(0), Provenance::GroundTruth);
    let mut masks = Vec::new();

    for (i, b) in boxes.iter().enumerate() {
        let dist = ((b.location[0] - sensor[0]).powi(2) + (b.location[2] - sensor[2]).powi(2)).sqrt();
        let n = (cfg.points_at_10m * (10.0 / dist).powi(2)).round() as usize;
        let n = n.clamp(cfg.min_object_points, cfg.max_object_points.max(cfg.min_object_points));
        for p in sample_surface(&mut rng, b, sensor, n, cfg.ground_clearance) {
            if cfg.point_dropout > 0.0 && rng.random_bool(cfg.point_dropout) {
                continue;
            }
            let refl = rng.random_range(0.35..0.9) as f32;
            rect_points.push((p, refl, PointSource::Object(i)));
        }

        let raw = projected_aabb(b, &cfg.calib, None).expect("placed boxes are in front");
        let clipped = raw.clipped(cfg.extent);
        let truncation = if raw.area() > 0.0 {
            (1.0 - clipped.area() / raw.area()).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut box2d = clipped;
        if cfg.pixel_jitter > 0.0 {
            let (x1, y1, x2, y2) = (
                clipped.x1 + jitter.sample(&mut rng),
                clipped.y1 + jitter.sample(&mut rng),
                clipped.x2 + jitter.sample(&mut rng),
                clipped.y2 + jitter.sample(&mut rng),
            );
            box2d = Box2D::new(x1.min(x2), y1.min(y2), x1.max(x2), y1.max(y2)).clipped(cfg.extent);
        }
        let occlusion = occlusion_level(i, &boxes, [sensor[0], sensor[2]]);
        let small = if box2d.height() < 40.0 { 0.1 } else { 0.0 };
        let sigma = 0.97 - 0.12 * occlusion as f64 - 0.3 * truncation - small
            + 0.03 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        box2d.score = Some(sigma.clamp(0.05, 0.999));
        masks.push(Some(rasterize_silhouette(b, &box2d, &cfg.calib, cfg.extent)));
        let mut obj = LabeledObject::new("Car", box2d).with_box3d(*b);
        obj.truncation = truncation;
        obj.occlusion = occlusion;
        labels.objects.push(obj);
    }

    for _ in 0..cfg.dontcare_regions {
        let w = rng.random_range(15.0..60.0);
        let h = rng.random_range(10.0..40.0);
        let x1 = rng.random_range(0.0..(cfg.extent.width as f64 - w).max(1.0));
        let y1 = rng.random_range(0.0..(cfg.extent.height as f64 / 2.0));
        labels
            .objects
            .push(LabeledObject::new(DONT_CARE, Box2D::new(x1, y1, x1 + w, y1 + h)));
        masks.push(None);
    }

    let ground_x = [-25.0, 25.0];
    let ground_z = [2.0, 55.0];
    let footprints: Vec<Box3D> = boxes.iter().map(|b| inflated(b, 0.05)).collect();
    let clutter_keepout: Vec<Box3D> = boxes.iter().map(|b| inflated(b, 0.4)).collect();
    let inside_any = |set: &[Box3D], x: f64, z: f64| {
        set.iter().any(|b| crate::geometry3d::bev_contains(b, x, z))
    };
    let mut placed = 0;
    while placed < cfg.ground_points {
        let (x, z) = (uniform(&mut rng, ground_x), uniform(&mut rng, ground_z));
        if inside_any(&footprints, x, z) {
            continue;
        }
        let refl = rng.random_range(0.0..0.3) as f32;
        rect_points.push(([x, ground_y, z], refl, PointSource::Ground));
        placed += 1;
    }
    placed = 0;
    while placed < cfg.clutter_points {
        let (x, z) = (uniform(&mut rng, ground_x), uniform(&mut rng, ground_z));
        if inside_any(&clutter_keepout, x, z) {
            continue;
        }
        let y = ground_y - rng.random_range(0.3..3.0);
        let refl = rng.random_range(0.0..1.0) as f32;
        rect_points.push(([x, y, z], refl, PointSource::Clutter));
        placed += 1;
    }

    let mut points = Vec::with_capacity(rect_points.len());
    let mut sources = Vec::with_capacity(rect_points.len());
    for (mut p, refl, src) in rect_points {
        if cfg.point_noise > 0.0 {
            for v in &mut p {
                *v += noise.sample(&mut rng);
            }
        }
        let l = cfg.calib.rect_to_lidar(p);
        points.push([l[0] as f32, l[1] as f32, l[2] as f32, refl]);
        sources.push(src);
    }

    Ok(SyntheticScene {
        labels,
        cloud: PointCloud::new(points),
        calib: cfg.calib,
        extent: cfg.extent,
        masks,
        point_sources: sources,
        ground_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry3d::bev_contains;

    #[test]
    fn files_round_trip() {
        let scene = generate_synthetic_scene(scene_seed(7, 0), &SceneConfig::default()).unwrap();
        let files = scene.to_files().unwrap();
        let annos = crate::kitti_io::parse_label_file("0", &files.label_2, false).unwrap();
        assert!(annos.objects.iter().all(|o| o.box3d.is_none()));
        assert!(annos.cared().all(|o| o.box2d.score.is_some()));
        let gt = crate::kitti_io::parse_label_file("0", &files.gt_3d, true).unwrap();
        assert_eq!(gt.boxes3d().count(), scene.labels.boxes3d().count());
        let (extent, mask) = crate::kitti_io::parse_mask(&files.fg_mask).unwrap();
        assert_eq!(extent, scene.extent);
        assert!(mask.iter().any(|&v| v > 0.5));
        assert_ne!(scene_seed(7, 0), scene_seed(7, 1));
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = SceneConfig {
            point_noise: 0.02,
            pixel_jitter: 1.0,
            dontcare_regions: 2,
            ..SceneConfig::default()
        };
        let a = generate_synthetic_scene(7, &cfg).unwrap();
        let b = generate_synthetic_scene(7, &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_scene(8, &cfg).unwrap();
        assert_ne!(a.cloud, c.cloud);
    }

    #[test]
    fn zero_objects_gives_ground_and_clutter_only() {
        let cfg = SceneConfig {
            min_objects: 0,
            max_objects: 0,
            ..SceneConfig::default()
        };
        let s = generate_synthetic_scene(1, &cfg).unwrap();
        assert!(s.labels.objects.is_empty());
        assert_eq!(s.cloud.len(), cfg.ground_points + cfg.clutter_points);
        assert!(s
            .point_sources
            .iter()
            .all(|p| matches!(p, PointSource::Ground | PointSource::Clutter)));
    }

    #[test]
    fn impossible_placement_is_infeasible() {
        let cfg = SceneConfig {
            min_objects: 30,
            max_objects: 30,
            depth_range: [8.0, 9.0],
            lateral_range: [-1.0, 1.0],
            ..SceneConfig::default()
        };
        assert!(matches!(
            generate_synthetic_scene(3, &cfg),
            Err(FormatError::ConfigInfeasible { .. })
        ));
    }

    #[test]
    fn boxes_hold_their_surface_points() {
        let cfg = SceneConfig::default();
        for seed in 0..10 {
            let s = generate_synthetic_scene(seed, &cfg).unwrap();
            for (i, o) in s.labels.objects.iter().enumerate() {
                let b = o.box3d.unwrap();
                let grown = inflated(&b, 1e-6);
                let inside = s
                    .point_sources
                    .iter()
                    .enumerate()
                    .filter(|(_, src)| **src == PointSource::Object(i))
                    .filter(|(k, _)| {
                        let p = s.calib.lidar_to_rect(s.cloud.xyz(*k));
                        let [top, bottom] = b.y_extent();
                        bev_contains(&grown, p[0], p[2]) && p[1] >= top - 1e-5 && p[1] <= bottom + 1e-5
                    })
                    .count();
                assert!(inside >= 8, "seed {seed} object {i}: {inside}");
            }
        }
    }

    #[test]
    fn gt_boxes_are_clipped_projections_and_masks_fit() {
        let cfg = SceneConfig::default();
        for seed in 0..10 {
            let s = generate_synthetic_scene(seed, &cfg).unwrap();
            for (o, m) in s.labels.objects.iter().zip(&s.masks) {
                let b = o.box3d.unwrap();
                let want = projected_aabb(&b, &s.calib, Some(s.extent)).unwrap();
                assert_eq!((o.box2d.x1, o.box2d.y1, o.box2d.x2, o.box2d.y2), (want.x1, want.y1, want.x2, want.y2));
                let m = m.as_ref().unwrap();
                assert!(m.col0 as f64 >= o.box2d.x1.floor() && (m.col0 + m.width) as f64 <= o.box2d.x2.ceil());
                assert!(m.data.iter().any(|&v| v > 0.5));
                let score = o.box2d.score.unwrap();
                assert!((0.0..=1.0).contains(&score));
            }
        }
    }
}
