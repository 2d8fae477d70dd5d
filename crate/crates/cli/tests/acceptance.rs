//! Acceptance run: one pass/fail line per criterion, exit status 1 if any
//! criterion fails. Every check uses an oracle written here, independent
//! of the library code under test.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::{run, run_ok, s, synth};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weak3d::eval::{ap40, evaluate, recall_table, Difficulty, DifficultyRule, EvalReport, IouKind};
use weak3d::frustum_labeler::{label_frame, FrustumConfig, InitialLabelReport};
use weak3d::geometry3d::{
    bev_iou, check_giou_gradients, corners_3d, iou_3d, projected_aabb, GradientCheckConfig,
};
use weak3d::guidance::{
    build_toy_dataset, evaluate_toy, focal_loss, focal_loss_logits, kl_guidance, kl_guidance_logits,
    l2_feature_loss, output_level_loss, train_toy_on, FocalParams, ObjectnessMap, Pixel, PixelFeatureMap,
    SparseFeatureMap, ToyConfig,
};
use weak3d::kitti_io::{
    frame_id, generate_synthetic_scene, parse_calibration, parse_label_file, parse_point_cloud, scene_seed,
    write_calibration, write_label_file, write_point_cloud, Box2D, Box3D, Calibration, FrameLabelSet,
    ImageExtent, LabeledObject, PointCloud, Provenance, SceneConfig, SplitLayout, Strictness, SyntheticScene,
};
use weak3d::pseudo_label::{
    filter_round, hungarian_match, self_training, FilterConfig, RefineFrame, SimulatedDetector,
    SimulatedDetectorConfig,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: u64, what: &str) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_s as f64,
        format!("{what} took {:.1}s (limit {limit_s}s)", elapsed.as_secs_f64()),
    )
}

fn random_box(rng: &mut ChaCha8Rng) -> Box3D {
    Box3D::new(
        [rng.random_range(-10.0..10.0), rng.random_range(1.2..2.0), rng.random_range(6.0..45.0)],
        rng.random_range(1.3..1.9),
        rng.random_range(1.4..2.0),
        rng.random_range(3.2..4.8),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}

// ---------------------------------------------------------------------------
// 1. Geometry oracles

/// Ground-plane point inside a box footprint: rotate into the box frame,
/// where the length axis is `(cos ry, -sin ry)` in `(x, z)`.
fn footprint_contains(b: &Box3D, x: f64, z: f64) -> bool {
    let (dx, dz) = (x - b.location[0], z - b.location[2]);
    let (s, c) = b.yaw.sin_cos();
    let along = dx * c - dz * s;
    let across = dx * s + dz * c;
    along.abs() <= b.dims.l / 2.0 && across.abs() <= b.dims.w / 2.0
}

fn monte_carlo_bev_iou(a: &Box3D, b: &Box3D, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let r = |bx: &Box3D| 0.5 * bx.dims.l.hypot(bx.dims.w);
    let lo_x = (a.location[0] - r(a)).min(b.location[0] - r(b));
    let hi_x = (a.location[0] + r(a)).max(b.location[0] + r(b));
    let lo_z = (a.location[2] - r(a)).min(b.location[2] - r(b));
    let hi_z = (a.location[2] + r(a)).max(b.location[2] + r(b));
    let (mut in_a, mut in_b, mut both) = (0u64, 0u64, 0u64);
    for _ in 0..samples {
        let x = rng.random_range(lo_x..hi_x);
        let z = rng.random_range(lo_z..hi_z);
        let (ia, ib) = (footprint_contains(a, x, z), footprint_contains(b, x, z));
        in_a += ia as u64;
        in_b += ib as u64;
        both += (ia && ib) as u64;
    }
    both as f64 / (in_a + in_b - both) as f64
}

/// Best total IoU over every partial injection of rows into columns,
/// counting only entries above `floor`.
fn exhaustive_total(m: &[Vec<f64>], floor: f64) -> f64 {
    fn go(m: &[Vec<f64>], row: usize, used: &mut Vec<bool>, floor: f64) -> f64 {
        if row == m.len() {
            return 0.0;
        }
        let mut best = go(m, row + 1, used, floor);
        for c in 0..used.len() {
            if !used[c] && m[row][c] > floor {
                used[c] = true;
                best = best.max(m[row][c] + go(m, row + 1, used, floor));
                used[c] = false;
            }
        }
        best
    }
    let cols = m.first().map_or(0, |r| r.len());
    go(m, 0, &mut vec![false; cols], floor)
}

fn criterion_1() -> Check {
    let calib = Calibration::kitti_like();
    let t = Instant::now();
    let trials = check_giou_gradients(&GradientCheckConfig::default(), &calib);
    let grad_time = t.elapsed();
    let worst_grad = trials.iter().map(|t| t.rel_error).fold(0.0, f64::max);
    ensure(trials.len() == 100, "expected 100 gradient trials")?;
    ensure(trials.iter().all(|t| t.rel_error < 1e-5), format!("gradient rel error {worst_grad:.2e}"))?;
    within(grad_time, 5, "gradient check")?;

    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_bev: f64 = 0.0;
    for _ in 0..50 {
        let a = random_box(&mut rng);
        let mut b = random_box(&mut rng);
        b.location[0] = a.location[0] + rng.random_range(-2.5..2.5);
        b.location[2] = a.location[2] + rng.random_range(-3.5..3.5);
        let mc = monte_carlo_bev_iou(&a, &b, 1_000_000, &mut rng);
        worst_bev = worst_bev.max((mc - bev_iou(&a, &b)).abs());
    }
    let bev_time = t.elapsed();
    ensure(worst_bev < 5e-3, format!("BEV IoU off Monte Carlo by {worst_bev:.2e}"))?;
    within(bev_time, 60, "BEV Monte Carlo")?;

    let t = Instant::now();
    let mut worst_hung: f64 = 0.0;
    for _ in 0..200 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let m: Vec<Vec<f64>> = (0..r)
            .map(|_| (0..c).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random() }).collect())
            .collect();
        let got = hungarian_match(&m, 0.0).total_iou();
        worst_hung = worst_hung.max((got - exhaustive_total(&m, 0.0)).abs());
    }
    within(t.elapsed(), 5, "Hungarian check")?;
    ensure(worst_hung < 1e-9, format!("Hungarian off optimum by {worst_hung:.2e}"))?;
    Ok(format!(
        "gradient worst rel {worst_grad:.1e} ({:.2}s); BEV worst |diff| {worst_bev:.1e} ({:.1}s); Hungarian worst {worst_hung:.0e}",
        grad_time.as_secs_f64(),
        bev_time.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// 2. Projected box and output-level loss

fn criterion_2() -> Check {
    let calib = Calibration::kitti_like();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for i in 0..1000 {
        let b = random_box(&mut rng);
        let got = projected_aabb(&b, &calib, None).map_err(|e| format!("box {i}: {e}"))?;
        let p = calib.cam_projection;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for c in corners_3d(&b).0 {
            let (u, v, _) = calib.project(c);
            lo = [lo[0].min(u), lo[1].min(v)];
            hi = [hi[0].max(u), hi[1].max(v)];
            // Independent projection through P2 must agree to rounding.
            let w = p[2][0] * c[0] + p[2][1] * c[1] + p[2][2] * c[2] + p[2][3];
            let uu = (p[0][0] * c[0] + p[0][1] * c[1] + p[0][2] * c[2] + p[0][3]) / w;
            ensure((uu - u).abs() < 1e-9, format!("box {i}: projection mismatch"))?;
        }
        let expected = Box2D::new(lo[0], lo[1], hi[0], hi[1]);
        ensure(
            (got.x1, got.y1, got.x2, got.y2) == (expected.x1, expected.y1, expected.x2, expected.y2),
            format!("box {i}: {got:?} vs {expected:?}"),
        )?;
    }

    let mut worst_zero: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..50 {
        let preds: Vec<Box3D> = (0..3).map(|_| random_box(&mut rng)).collect();
        let exact: Vec<Box2D> = preds
            .iter()
            .map(|b| projected_aabb(b, &calib, None).unwrap().with_score(rng.random_range(0.1..1.0)))
            .collect();
        let pairs = [(0, 0), (1, 1), (2, 2)];
        worst_zero = worst_zero.max(output_level_loss(&preds, &exact, &calib, &pairs).unwrap().loss.abs());
        let targets: Vec<Box2D> = exact
            .iter()
            .map(|t| {
                let j = |r: &mut ChaCha8Rng| r.random_range(-25.0..25.0);
                Box2D::new(t.x1 + j(&mut rng), t.y1 + j(&mut rng), t.x2 + j(&mut rng), t.y2 + j(&mut rng))
                    .with_score(t.score.unwrap())
            })
            .collect();
        let base = output_level_loss(&preds, &targets, &calib, &pairs).unwrap().loss;
        let c = rng.random_range(0.01..50.0);
        let scaled: Vec<Box2D> = targets.iter().map(|t| t.with_score(t.score.unwrap() * c)).collect();
        let again = output_level_loss(&preds, &scaled, &calib, &pairs).unwrap().loss;
        worst_scale = worst_scale.max((again - base).abs());
    }
    ensure(worst_zero < 1e-9, format!("loss at perfect overlap {worst_zero:.1e}"))?;
    ensure(worst_scale < 1e-12, format!("score scaling changed loss by {worst_scale:.1e}"))?;
    Ok(format!(
        "1000 boxes exact; loss at perfect overlap {worst_zero:.0e}; scaling drift {worst_scale:.0e}"
    ))
}

// ---------------------------------------------------------------------------
// 3. Loss suite

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1e-12f64, |m, a| m.max(a.abs()));
    analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs())) / scale
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let extent = ImageExtent::new(6, 8);
    let region: Vec<Pixel> = (0..6).flat_map(|r| (0..8).map(move |c| Pixel::new(r, c))).collect();
    let mut min_kl = f64::INFINITY;
    let mut worst_same: f64 = 0.0;
    let mut worst_focal_perfect: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    let mut l2_mismatch = 0;
    for _ in 0..100 {
        let a: Vec<f64> = (0..extent.pixel_count()).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..extent.pixel_count()).map(|_| rng.random()).collect();
        let (ma, mb) = (ObjectnessMap::dense(extent, a.clone()), ObjectnessMap::dense(extent, b));
        min_kl = min_kl.min(kl_guidance(&ma, &mb, &region).unwrap().loss);
        worst_same = worst_same.max(kl_guidance(&ma, &ma, &region).unwrap().loss.abs());

        let target: Vec<f64> = a.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
        let mt = ObjectnessMap::dense(extent, target.clone());
        worst_focal_perfect = worst_focal_perfect.max(focal_loss(&mt, &mt, &region, &FocalParams::default()).unwrap().loss);

        let logits: Vec<f64> = (0..20).map(|_| rng.random_range(-4.0..4.0)).collect();
        let reference: Vec<f64> = (0..20).map(|_| rng.random_range(0.01..0.99)).collect();
        let targets: Vec<f64> = (0..20).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let params = FocalParams::default();
        let fl = focal_loss_logits(&logits, &targets, &params);
        let num = central_diff(|z| focal_loss_logits(z, &targets, &params).loss, &logits, 1e-6);
        worst_grad = worst_grad.max(rel_err(&fl.grad, &num));
        let kl = kl_guidance_logits(&reference, &logits);
        let num = central_diff(|z| kl_guidance_logits(&reference, z).loss, &logits, 1e-6);
        worst_grad = worst_grad.max(rel_err(&kl.grad, &num));

        let channels = rng.random_range(1..5);
        let dense: Vec<f64> = (0..extent.pixel_count() * channels).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f_image = PixelFeatureMap::new(extent, channels, dense.clone());
        let picked: Vec<Pixel> = region.iter().copied().filter(|_| rng.random_bool(0.4)).collect();
        let mut values = BTreeMap::new();
        for &px in &picked {
            values.insert(px, (0..channels).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
        }
        let f_points = SparseFeatureMap { channels, values };
        let got = l2_feature_loss(&f_image, &f_points, &picked).unwrap();
        let mut total = 0.0;
        for px in &picked {
            let base = (px.row * extent.width + px.col) as usize * channels;
            let mut sq = 0.0;
            for k in 0..channels {
                let d = dense[base + k] - f_points.values[px][k];
                sq += d * d;
            }
            total += f64::sqrt(sq);
        }
        let expected = if picked.is_empty() { 0.0 } else { total / picked.len() as f64 };
        l2_mismatch += usize::from(got != expected);
    }
    ensure(min_kl >= 0.0, format!("negative KL {min_kl:e}"))?;
    ensure(worst_same < 1e-9, format!("KL on identical maps {worst_same:e}"))?;
    ensure(worst_focal_perfect < 1e-5, format!("focal at perfect prediction {worst_focal_perfect:e}"))?;
    ensure(worst_grad < 1e-5, format!("loss gradient rel error {worst_grad:e}"))?;
    ensure(l2_mismatch == 0, format!("{l2_mismatch} L2 cases differ from the double loop"))?;
    Ok(format!(
        "min KL {min_kl:.2e}; KL(same) {worst_same:.0e}; focal(perfect) {worst_focal_perfect:.1e}; grad rel {worst_grad:.1e}; L2 exact"
    ))
}

// ---------------------------------------------------------------------------
// 4. Filter rules

fn pred_set(boxes: &[Box3D]) -> FrameLabelSet {
    FrameLabelSet {
        objects: boxes
            .iter()
            .map(|b| LabeledObject::new("Car", Box2D::new(0.0, 0.0, 1.0, 1.0)).with_box3d(*b))
            .collect(),
        ..FrameLabelSet::new("f", Provenance::Prediction)
    }
}

fn anno_set(boxes: &[Box2D]) -> FrameLabelSet {
    FrameLabelSet {
        objects: boxes.iter().map(|b| LabeledObject::new("Car", *b)).collect(),
        ..FrameLabelSet::new("f", Provenance::GroundTruth)
    }
}

fn criterion_4() -> Check {
    let calib = Calibration::kitti_like();
    let cfg = FilterConfig::default();
    ensure((cfg.alpha0, cfg.alpha1, cfg.alpha2) == (0.5, 0.5, 0.95), "default thresholds")?;
    let car = Box3D::new([1.0, 1.6, 15.0], 1.5, 1.6, 3.9, 0.3);

    // IoU 0.6 against the annotation and fused (0.6 + 0.5) / 2 = 0.55: kept.
    let b = car.with_score(0.6);
    let p = projected_aabb(&b, &calib, None).unwrap();
    let anno = Box2D::new(p.x1, p.y1, p.x1 + p.width() / 0.6, p.y2);
    let inter = p.width() * p.height();
    let iou = inter / (anno.width() * anno.height());
    ensure((iou - 0.6).abs() < 1e-12, format!("constructed IoU {iou}"))?;
    let out = filter_round(&pred_set(&[b]), &anno_set(&[anno]), &[0.5], &calib, None, &cfg).map_err(|e| e.to_string())?;
    ensure(out.overlap == vec![0] && out.rescued.is_empty(), "IoU 0.6 / fused 0.55 case not kept")?;

    for (score, kept) in [(0.96, true), (0.90, false)] {
        let out = filter_round(&pred_set(&[car.with_score(score)]), &anno_set(&[]), &[], &calib, None, &cfg)
            .map_err(|e| e.to_string())?;
        ensure(out.overlap.is_empty() && (out.rescued == vec![0]) == kept, format!("sigma_P {score} case"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let grid = [0.0, 0.25, 0.5, 0.75, 0.95, 1.0];
    let subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.contains(x));
    for frame in 0..50 {
        let n = rng.random_range(0..8);
        let boxes: Vec<Box3D> = (0..n).map(|_| random_box(&mut rng).with_score(rng.random())).collect();
        let mut annos = Vec::new();
        for b in &boxes {
            if !rng.random_bool(0.7) {
                continue;
            }
            if let Ok(p) = projected_aabb(b, &calib, None) {
                let j = |r: &mut ChaCha8Rng| r.random_range(-15.0..15.0);
                annos.push(Box2D::new(p.x1 + j(&mut rng), p.y1 + j(&mut rng), p.x2 + j(&mut rng), p.y2 + j(&mut rng)));
            }
        }
        let sigma: Vec<f64> = annos.iter().map(|_| rng.random()).collect();
        let (ps, asets) = (pred_set(&boxes), anno_set(&annos));
        let run = |c: FilterConfig| filter_round(&ps, &asets, &sigma, &calib, None, &c).unwrap();
        for w in grid.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let fail = |what: &str| format!("frame {frame}: {what} not monotone at {lo}->{hi}");
            ensure(
                subset(&run(FilterConfig { alpha0: hi, ..cfg }).overlap, &run(FilterConfig { alpha0: lo, ..cfg }).overlap),
                fail("alpha0"),
            )?;
            ensure(
                subset(&run(FilterConfig { alpha1: hi, ..cfg }).overlap, &run(FilterConfig { alpha1: lo, ..cfg }).overlap),
                fail("alpha1"),
            )?;
            ensure(
                subset(&run(FilterConfig { alpha2: hi, ..cfg }).rescued, &run(FilterConfig { alpha2: lo, ..cfg }).rescued),
                fail("alpha2"),
            )?;
        }
    }
    Ok("three worked cases exact; alpha sweeps monotone on 50 frames".into())
}

// ---------------------------------------------------------------------------
// 5. Recall over refinement rounds

fn criterion_5() -> Check {
    let start = Instant::now();
    let scene = SceneConfig {
        point_noise: 0.08,
        ..SceneConfig::default()
    };
    let (mut initial, mut frames, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..200 {
        let sc = generate_synthetic_scene(20_000 + i as u64, &scene).map_err(|e| e.to_string())?;
        let mut gt = sc.labels.clone();
        gt.frame_id = frame_id(i);
        let mut annos = gt.clone();
        for o in &mut annos.objects {
            o.box3d = None;
        }
        initial.push(label_frame(&sc.cloud, &annos, &sc.calib, &FrustumConfig::default()).0);
        frames.push(RefineFrame {
            sigma_i: annos.objects.iter().map(|o| o.box2d.score.unwrap_or(0.0)).collect(),
            annos,
            calib: sc.calib,
            extent: Some(sc.extent),
            gt: Some(gt.clone()),
        });
        truth.push((gt, sc.calib));
    }
    let mut det = SimulatedDetector::new(truth, SimulatedDetectorConfig::default());
    let cfg = FilterConfig {
        max_rounds: 3,
        convergence_eps: 0.0,
        ..FilterConfig::default()
    };
    let traj = self_training(&initial, &frames, &mut det, &cfg).map_err(|e| e.to_string())?;
    let r = traj.recall_at_07().ok_or("no recall")?;
    let shown: Vec<String> = r.iter().map(|v| format!("{v:.4}")).collect();
    let detail = format!("recall@0.7 {} in {:.1}s", shown.join(" -> "), start.elapsed().as_secs_f64());
    ensure(r.len() == 4, format!("{detail}: expected 3 rounds"))?;
    ensure(r[1] - r[0] >= 0.10, format!("{detail}: first-round gain below 0.10"))?;
    ensure((r[3] - r[2]).abs() < 0.01, format!("{detail}: not saturated by round 3"))?;
    within(start.elapsed(), 120, "refinement suite")?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 6. Frustum bootstrap

fn frustum_suite(frames: u64, scene: &SceneConfig) -> (InitialLabelReport, f64) {
    let mut report = InitialLabelReport::empty("suite");
    let (mut sum, mut count) = (0.0, 0usize);
    for seed in 0..frames {
        let sc = generate_synthetic_scene(7000 + seed, scene).unwrap();
        let (labels, r) = label_frame(&sc.cloud, &sc.labels, &sc.calib, &FrustumConfig::default());
        report.merge(&r);
        for (fit, gt) in labels.objects.iter().zip(&sc.labels.objects) {
            if let Some(g) = gt.box3d {
                count += 1;
                sum += fit.box3d.map_or(0.0, |f| iou_3d(&f, &g));
            }
        }
    }
    (report, sum / count as f64)
}

fn criterion_6() -> Check {
    let (r, mean) = frustum_suite(60, &SceneConfig::default());
    let rate = r.fitted as f64 / r.attempted as f64;
    ensure(rate >= 0.95, format!("fit rate {rate:.3}"))?;
    ensure(mean >= 0.7, format!("mean 3D IoU {mean:.3}"))?;
    let levels = [0.03, 0.1, 0.25];
    let noisy: Vec<f64> = levels
        .iter()
        .map(|&n| {
            frustum_suite(
                40,
                &SceneConfig {
                    point_noise: n,
                    ..SceneConfig::default()
                },
            )
            .1
        })
        .collect();
    ensure(
        noisy.windows(2).all(|w| w[0] > w[1]) && mean > noisy[0],
        format!("IoU by noise {levels:?}: {noisy:?}"),
    )?;
    Ok(format!(
        "fitted {}/{} ({rate:.3}), mean IoU {mean:.3}; noise {levels:?} -> IoU {:.3} {:.3} {:.3}",
        r.fitted, r.attempted, noisy[0], noisy[1], noisy[2]
    ))
}

// ---------------------------------------------------------------------------
// 7. Evaluator

fn car_at(x: f64, z: f64) -> LabeledObject {
    LabeledObject::new("Car", Box2D::new(100.0 + 10.0 * x, 100.0, 200.0 + 10.0 * x, 180.0))
        .with_box3d(Box3D::new([x, 1.6, z], 1.5, 1.6, 3.9, 0.0))
}

fn with_score(mut o: LabeledObject, s: f64) -> LabeledObject {
    o.box3d = o.box3d.map(|b| b.with_score(s));
    o
}

fn frame_of(id: &str, objects: Vec<LabeledObject>) -> FrameLabelSet {
    FrameLabelSet {
        objects,
        ..FrameLabelSet::new(id, Provenance::GroundTruth)
    }
}

fn criterion_7() -> Check {
    let rule = DifficultyRule::default();
    let scenes: Vec<SyntheticScene> = (0..20).map(|i| generate_synthetic_scene(900 + i, &SceneConfig::default()).unwrap()).collect();
    let gts: Vec<FrameLabelSet> = scenes
        .iter()
        .enumerate()
        .map(|(i, sc)| FrameLabelSet {
            frame_id: frame_id(i),
            ..sc.labels.clone()
        })
        .collect();
    let perfect: Vec<FrameLabelSet> = gts
        .iter()
        .map(|f| frame_of(&f.frame_id, f.objects.iter().cloned().map(|o| with_score(o, 1.0)).collect()))
        .collect();
    for kind in IouKind::ALL {
        for bucket in Difficulty::ALL {
            let ap = ap40(&perfect, &gts, kind, 0.7, bucket, &rule).map_err(|e| e.to_string())?.ap;
            ensure(ap == 1.0, format!("GT-as-predictions AP {ap} ({kind}, {bucket})"))?;
        }
    }

    // Hand case: hits at scores 0.9 and 0.7, a miss at 0.8, three objects.
    // Precision is 1 for the 13 recall positions up to 1/3, 2/3 for the next
    // 13 up to 2/3, and 0 beyond.
    let hgts = vec![
        frame_of("a", vec![car_at(0.0, 10.0)]),
        frame_of("b", vec![car_at(0.0, 10.0)]),
        frame_of("c", vec![car_at(0.0, 10.0)]),
    ];
    let hdets = vec![
        frame_of("a", vec![with_score(car_at(0.0, 10.0), 0.9)]),
        frame_of("b", vec![with_score(car_at(8.0, 30.0), 0.8)]),
        frame_of("c", vec![with_score(car_at(0.0, 10.0), 0.7)]),
    ];
    let expected = (13.0 * 1.0 + 13.0 * (2.0 / 3.0)) / 40.0;
    let got = ap40(&hdets, &hgts, IouKind::ThreeD, 0.7, Difficulty::Hard, &rule).map_err(|e| e.to_string())?.ap;
    ensure((got - expected).abs() < 1e-9, format!("hand case AP {got} vs {expected}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for set in 0..100 {
        let mut labels = Vec::new();
        for f in &gts {
            let mut objects = Vec::new();
            for o in &f.objects {
                if !rng.random_bool(0.8) {
                    continue;
                }
                let mut o = o.clone();
                if let Some(b) = &mut o.box3d {
                    let sigma = rng.random_range(0.0..0.6);
                    b.location[0] += sigma * (rng.random::<f64>() - 0.5);
                    b.location[2] += sigma * (rng.random::<f64>() - 0.5);
                    b.yaw += 0.3 * sigma * (rng.random::<f64>() - 0.5);
                }
                objects.push(o);
            }
            labels.push(frame_of(&f.frame_id, objects));
        }
        let t = recall_table(&labels, &gts, &[IouKind::ThreeD, IouKind::Bev], &[0.5, 0.7]);
        for kind in [IouKind::ThreeD, IouKind::Bev] {
            let (r5, r7) = (t.get(kind, 0.5).unwrap(), t.get(kind, 0.7).unwrap());
            ensure(r7 <= r5, format!("set {set}: recall@0.7 {r7} > recall@0.5 {r5} ({kind})"))?;
        }
    }

    let noisy: Vec<FrameLabelSet> = perfect
        .iter()
        .map(|f| {
            let objects = f
                .objects
                .iter()
                .map(|o| {
                    let mut o = o.clone();
                    if let Some(b) = &mut o.box3d {
                        b.location[0] += rng.random_range(-0.4..0.4);
                        *b = b.with_score(rng.random());
                    }
                    o
                })
                .collect();
            frame_of(&f.frame_id, objects)
        })
        .collect();
    let kinds = [IouKind::ThreeD, IouKind::Bev, IouKind::TwoD];
    let base = evaluate(&noisy, &gts, &kinds, &[0.5, 0.7], &rule).map_err(|e| e.to_string())?;
    for _ in 0..5 {
        let (mut d, mut g) = (noisy.clone(), gts.clone());
        d.shuffle(&mut rng);
        g.shuffle(&mut rng);
        let again = evaluate(&d, &g, &kinds, &[0.5, 0.7], &rule).map_err(|e| e.to_string())?;
        ensure(again == base, "report changed under frame shuffling")?;
    }
    Ok(format!("GT AP 1.0 everywhere; hand case {got:.6}; recall monotone on 100 sets; shuffle invariant"))
}

// ---------------------------------------------------------------------------
// 8. Toy feature-level training

fn criterion_8() -> Check {
    let scenes = |base: u64, n: u64| -> Vec<SyntheticScene> {
        (0..n).map(|i| generate_synthetic_scene(base + i, &SceneConfig::default()).unwrap()).collect()
    };
    let mut wins = 0;
    for seed in 0..10u64 {
        let cfg = ToyConfig {
            seed,
            ..ToyConfig::default()
        };
        let train = build_toy_dataset(&scenes(1000 + 50 * seed, 20), &cfg);
        let held_out = build_toy_dataset(&scenes(5000 + 50 * seed, 10), &cfg);
        let with_kl = train_toy_on(&train, &cfg).map_err(|e| e.to_string())?;
        let focal_only = train_toy_on(&train, &ToyConfig { use_kl: false, ..cfg }).map_err(|e| e.to_string())?;
        let a = evaluate_toy(&with_kl, &held_out).kl_point_to_image;
        let b = evaluate_toy(&focal_only, &held_out).kl_point_to_image;
        wins += usize::from(a < b);
    }
    ensure(wins >= 8, format!("focal+KL won {wins}/10"))?;
    Ok(format!("focal+KL beats focal-only on held-out KL in {wins}/10 seeds"))
}

// ---------------------------------------------------------------------------
// 9. Format round-trips and CLI parity

fn q2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn random_object(rng: &mut ChaCha8Rng) -> LabeledObject {
    let x1 = rng.random_range(0.0..1000.0);
    let y1 = rng.random_range(0.0..300.0);
    let mut o = LabeledObject::new(
        ["Car", "Pedestrian", "Cyclist", "Van"][rng.random_range(0..4)],
        Box2D::new(x1, y1, x1 + rng.random_range(5.0..200.0), y1 + rng.random_range(5.0..100.0)),
    );
    o.truncation = rng.random_range(0.0..1.0);
    o.occlusion = rng.random_range(0..4);
    o.box3d = Some(random_box(rng).with_score(rng.random()));
    o
}

fn check_label_round_trip(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let set = FrameLabelSet {
        objects: (0..rng.random_range(1..6)).map(|_| random_object(rng)).collect(),
        ..FrameLabelSet::new("000000", Provenance::GroundTruth)
    };
    let text = write_label_file(&set, true).map_err(|e| e.to_string())?;
    let back = parse_label_file("000000", &text, true).map_err(|e| e.to_string())?;
    ensure(back.objects.len() == set.objects.len(), "object count")?;
    for (a, b) in set.objects.iter().zip(&back.objects) {
        let (a3, b3) = (a.box3d.unwrap(), b.box3d.unwrap());
        let pairs = [
            (a.box2d.x1, b.box2d.x1),
            (a.box2d.y1, b.box2d.y1),
            (a.box2d.x2, b.box2d.x2),
            (a.box2d.y2, b.box2d.y2),
            (a.truncation, b.truncation),
            (a3.dims.h, b3.dims.h),
            (a3.dims.w, b3.dims.w),
            (a3.dims.l, b3.dims.l),
            (a3.location[0], b3.location[0]),
            (a3.location[1], b3.location[1]),
            (a3.location[2], b3.location[2]),
            (a3.yaw, b3.yaw),
        ];
        for (x, y) in pairs {
            ensure((q2(x) - y).abs() < 1e-9, format!("label value {x} read back as {y}"))?;
        }
        ensure(a.class == b.class && a.occlusion == b.occlusion, "class/occlusion")?;
        ensure((a3.score.unwrap() - b3.score.unwrap()).abs() <= 5e-5 + 1e-12, "score")?;
    }
    // Alpha is derived from the written location and yaw, so it may move
    // once after quantization; every other column is stable, and the second
    // rewrite is a fixed point.
    let again = write_label_file(&back, true).unwrap();
    let without_alpha = |t: &str| -> Vec<Vec<String>> {
        t.lines()
            .map(|l| l.split(' ').enumerate().filter(|(i, _)| *i != 3).map(|(_, w)| w.to_string()).collect())
            .collect()
    };
    ensure(without_alpha(&again) == without_alpha(&text), format!("rewrite differs:\n{text}{again}"))?;
    let third = write_label_file(&parse_label_file("000000", &again, true).unwrap(), true).unwrap();
    ensure(third == again, "second rewrite is not a fixed point")?;
    Ok(())
}

fn check_calib_round_trip(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut c = Calibration::kitti_like();
    for row in c.cam_projection.iter_mut() {
        for v in row.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
    }
    let (s, co) = rng.random_range(-0.05f64..0.05).sin_cos();
    c.rectification = [[co, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, co]];
    for row in c.lidar_to_cam.iter_mut() {
        row[3] += rng.random_range(-0.5..0.5);
    }
    let back = parse_calibration(&write_calibration(&c), Strictness::Strict).map_err(|e| e.to_string())?;
    ensure(back == c, "calibration changed")
}

fn check_cloud_round_trip(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let pts: Vec<[f32; 4]> = (0..rng.random_range(0..300))
        .map(|_| {
            [
                rng.random_range(-80.0..80.0),
                rng.random_range(-80.0..80.0),
                rng.random_range(-3.0..3.0),
                rng.random(),
            ]
        })
        .collect();
    let cloud = PointCloud::new(pts);
    let back = parse_point_cloud(&write_point_cloud(&cloud)).map_err(|e| e.to_string())?;
    ensure(back == cloud, "point cloud changed")
}

fn cli_parity() -> Result<(), String> {
    let t = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = t.path().join("data");
    synth(&root, 6, 13);
    let layout = SplitLayout::new(&root, "training");
    let read = |p: &std::path::Path| std::fs::read_to_string(p).unwrap();

    // synth
    for i in 0..6 {
        let files = generate_synthetic_scene(scene_seed(13, i), &SceneConfig::default()).unwrap().to_files().unwrap();
        ensure(read(&layout.gt_3d(&frame_id(i))) == files.gt_3d, "synth gt_3d parity")?;
        ensure(std::fs::read(layout.velodyne(&frame_id(i))).unwrap() == files.velodyne, "synth velodyne parity")?;
    }

    // init-labels
    let init = t.path().join("init");
    run_ok(&["init-labels", "--root", s(&root), "--out", s(&init)]);
    let mut init_sets = Vec::new();
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    for id in layout.frame_ids().unwrap() {
        let annos = parse_label_file(&id, &read(&layout.label(&id)), false).unwrap();
        let calib = parse_calibration(&read(&layout.calib(&id)), Strictness::Strict).unwrap();
        let cloud = parse_point_cloud(&std::fs::read(layout.velodyne(&id)).unwrap()).unwrap();
        let (mut set, _) = label_frame(&cloud, &annos, &calib, &FrustumConfig::default());
        set.objects.retain(|o| o.box3d.is_some() || o.is_dont_care());
        let text = write_label_file(&set, true).unwrap();
        ensure(read(&init.join("label").join(format!("{id}.txt"))) == text, "init-labels parity")?;
        init_sets.push(parse_label_file(&id, &text, true).unwrap().with_provenance(Provenance::Initial));
        let gt = parse_label_file(&id, &read(&layout.gt_3d(&id)), true).unwrap();
        let extent = weak3d::kitti_io::parse_mask(&std::fs::read(layout.mask(&id)).unwrap()).unwrap().0;
        truth.push((gt.clone(), calib));
        frames.push(RefineFrame {
            sigma_i: annos.objects.iter().map(|o| o.box2d.score.unwrap()).collect(),
            annos,
            calib,
            extent: Some(extent),
            gt: Some(gt),
        });
    }

    // refine
    let refined = t.path().join("ref");
    run_ok(&["refine", "--root", s(&root), "--init", s(&init.join("label")), "--out", s(&refined)]);
    let mut det = SimulatedDetector::new(truth, SimulatedDetectorConfig::default());
    let traj = self_training(&init_sets, &frames, &mut det, &FilterConfig::default()).map_err(|e| e.to_string())?;
    for r in &traj.rounds {
        for set in &r.labels {
            let path = refined.join(format!("round_{}", r.round)).join("label").join(format!("{}.txt", set.frame_id));
            ensure(read(&path) == write_label_file(set, true).unwrap(), "refine parity")?;
        }
    }

    // eval
    let ev = t.path().join("ev");
    let last = refined.join(format!("round_{}", traj.rounds.len())).join("label");
    run_ok(&["eval", "--pred", s(&last), "--gt", s(&layout.dir("gt_3d")), "--out", s(&ev)]);
    let last_round = &traj.rounds.last().unwrap().labels;
    let dets: Vec<FrameLabelSet> = last_round
        .iter()
        .map(|f| parse_label_file(&f.frame_id, &write_label_file(f, true).unwrap(), true).unwrap())
        .collect();
    let gts: Vec<FrameLabelSet> = frames.iter().map(|f| f.gt.clone().unwrap()).collect();
    let lib = evaluate(&dets, &gts, &[IouKind::ThreeD, IouKind::Bev, IouKind::TwoD], &[0.5, 0.7], &DifficultyRule::default())
        .map_err(|e| e.to_string())?;
    ensure(read(&ev.join("report.json")).trim_end() == serde_json::to_string_pretty(&lib).unwrap(), "eval parity")?;
    ensure(read(&ev.join("report.csv")) == lib.to_csv(), "eval CSV parity")?;

    // check-gradients
    let gd = t.path().join("grad");
    run_ok(&["check-gradients", "--trials", "20", "--seed", "3", "--out", s(&gd)]);
    let trials = check_giou_gradients(
        &GradientCheckConfig {
            trials: 20,
            seed: 3,
            ..GradientCheckConfig::default()
        },
        &Calibration::kitti_like(),
    );
    ensure(read(&gd.join("gradients.json")).trim_end() == serde_json::to_string_pretty(&trials).unwrap(), "check-gradients parity")?;

    // plot
    let plots = t.path().join("plots");
    run_ok(&["plot", "--report", s(&ev.join("report.json")), "--out", s(&plots)]);
    let report: EvalReport = serde_json::from_str(&read(&ev.join("report.json"))).unwrap();
    let easy = &report.0["Easy"];
    let series: Vec<(String, Vec<f64>)> = easy
        .iter()
        .flat_map(|(k, ts)| {
            ts.iter()
                .filter(|(_, e)| e.ap.is_some())
                .map(move |(th, e)| (format!("{k} @ {th}: {:.2}", 100.0 * e.ap.unwrap()), e.curve.clone()))
        })
        .collect();
    ensure(
        read(&plots.join("report_pr_easy.svg")) == weak3d::render::pr_curves_svg("Easy precision-recall", &series),
        "plot parity",
    )?;

    // Exit codes.
    ensure(common::code(&run(&["synth", "--frames", "1"])) == 2, "missing root exit code")?;
    Ok(())
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for i in 0..500 {
        check_label_round_trip(&mut rng).map_err(|e| format!("label record {i}: {e}"))?;
        check_calib_round_trip(&mut rng).map_err(|e| format!("calib record {i}: {e}"))?;
        check_cloud_round_trip(&mut rng).map_err(|e| format!("cloud record {i}: {e}"))?;
    }
    cli_parity()?;
    Ok("500 label/calib/cloud round-trips; CLI parity on all six subcommands".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("geometry oracles", criterion_1),
        ("projected box and output loss", criterion_2),
        ("loss suite", criterion_3),
        ("filter rules", criterion_4),
        ("recall over rounds", criterion_5),
        ("frustum bootstrap", criterion_6),
        ("evaluator", criterion_7),
        ("toy guidance training", criterion_8),
        ("format round-trips and CLI parity", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
