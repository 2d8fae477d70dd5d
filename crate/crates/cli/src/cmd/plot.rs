use std::path::{Path, PathBuf};

use clap::Args;
use weak3d::eval::{EvalReport, IouKind, RecallTable};
use weak3d::kitti_io::{Box3D, Provenance};
use weak3d::render::{
    bev_scene_svg, pr_curves_svg, recall_bars_svg, BevLayer, BevView, GT_COLOR, INITIAL_COLOR, REFINED_COLOR,
};

use crate::cmd::refine::TrajectoryReport;
use crate::config::PipelineConfig;
use crate::error::{usage, usage_err, CliResult};
use crate::split::{read_calib, read_cloud, read_json, read_labels};

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// `report.json` from `eval` or `trajectory.json` from `refine`.
    #[arg(long)]
    pub report: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Frame id to render from above.
    #[arg(long, requires = "gt")]
    pub bev: Option<String>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long)]
    pub refined: Option<PathBuf>,
    /// Split directory holding `calib/` and `velodyne/`, to draw points.
    #[arg(long)]
    pub points: Option<PathBuf>,
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string()
}

fn eval_plots(report: &EvalReport, name: &str, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (bucket, kinds) in &report.0 {
        let series: Vec<(String, Vec<f64>)> = kinds
            .iter()
            .flat_map(|(kind, ts)| {
                ts.iter()
                    .filter(|(_, e)| e.ap.is_some())
                    .map(move |(t, e)| (format!("{kind} @ {t}: {:.2}", 100.0 * e.ap.unwrap_or(0.0)), e.curve.clone()))
            })
            .collect();
        let path = out.join(format!("{name}_pr_{}.svg", bucket.to_lowercase()));
        std::fs::write(&path, pr_curves_svg(&format!("{bucket} precision-recall"), &series))?;
        written.push(path);
    }
    Ok(written)
}

fn recall_plot(report: &TrajectoryReport, name: &str, out: &Path) -> CliResult<PathBuf> {
    let mut tables: Vec<(String, Option<&RecallTable>)> = vec![("initial".into(), report.initial_recall.as_ref())];
    tables.extend(report.rounds.iter().map(|r| (format!("round {}", r.round), r.recall.as_ref())));
    let labels: Vec<String> = tables.iter().map(|(l, _)| l.clone()).collect();
    let mut series = Vec::new();
    for kind in [IouKind::ThreeD, IouKind::Bev] {
        for t in [0.5, 0.7] {
            let v = tables
                .iter()
                .map(|(_, tab)| tab.and_then(|x| x.get(kind, t)).unwrap_or(0.0))
                .collect();
            series.push((format!("{kind} IoU {t}"), v));
        }
    }
    let path = out.join(format!("{name}_recall.svg"));
    std::fs::write(&path, recall_bars_svg("pseudo-label recall", &labels, &series))?;
    Ok(path)
}

fn boxes_of(dir: &Path, id: &str) -> CliResult<Vec<Box3D>> {
    let set = read_labels(&dir.join(format!("{id}.txt")), id, true, Provenance::Prediction)?;
    Ok(set.boxes3d().copied().collect())
}

pub fn run(args: PlotArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(o) = args.out {
        cfg.out_dir = Some(o);
    }
    let cfg = cfg.resolve()?;
    let out = cfg.out_dir()?.to_path_buf();
    if args.report.is_empty() && args.bev.is_none() {
        return Err(usage_err!("nothing to plot: pass --report or --bev"));
    }
    std::fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    for path in &args.report {
        let value: serde_json::Value = read_json(path)?;
        let name = stem(path);
        if value.get("rounds").is_some() {
            let report: TrajectoryReport = serde_json::from_value(value).map_err(usage)?;
            written.push(recall_plot(&report, &name, &out)?);
        } else {
            let report: EvalReport = serde_json::from_value(value).map_err(usage)?;
            written.extend(eval_plots(&report, &name, &out)?);
        }
    }
    if let (Some(id), Some(gt)) = (&args.bev, &args.gt) {
        let mut layers = vec![BevLayer {
            label: "ground truth".into(),
            color: GT_COLOR.into(),
            boxes: boxes_of(gt, id)?,
        }];
        for (dir, label, color) in [(&args.initial, "initial", INITIAL_COLOR), (&args.refined, "refined", REFINED_COLOR)] {
            if let Some(d) = dir {
                layers.push(BevLayer {
                    label: label.into(),
                    color: color.into(),
                    boxes: boxes_of(d, id)?,
                });
            }
        }
        let points = match &args.points {
            Some(split) => {
                let calib = read_calib(&split.join("calib").join(format!("{id}.txt")))?;
                let cloud = read_cloud(&split.join("velodyne").join(format!("{id}.bin")))?;
                (0..cloud.len())
                    .map(|i| {
                        let p = calib.lidar_to_rect(cloud.xyz(i));
                        [p[0], p[2]]
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        let view = BevView::fitting(&layers[0].boxes, 3.0, 12.0);
        let path = out.join(format!("bev_{id}.svg"));
        std::fs::write(&path, bev_scene_svg(&view, &layers, &points))?;
        written.push(path);
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(())
}
