use std::path::PathBuf;

use clap::Args;
use weak3d::eval::{evaluate, EvalReport, IouKind};
use weak3d::kitti_io::{FrameLabelSet, Provenance};

use crate::config::PipelineConfig;
use crate::error::{usage, CliResult};
use crate::split::{read_label_dir, write_json};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted 3D label files.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth 3D label files.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overlap kinds: 2d, bev, 3d.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<IouKind>>,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
}

/// Predictions without a score column rank as fully confident.
pub fn fill_scores(sets: &mut [FrameLabelSet]) {
    for o in sets.iter_mut().flat_map(|s| s.objects.iter_mut()) {
        if let Some(b) = &mut o.box3d {
            b.score.get_or_insert(1.0);
        }
        o.box2d.score.get_or_insert(1.0);
    }
}

pub fn run(args: EvalArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(o) = args.out {
        cfg.out_dir = Some(o);
    }
    if let Some(k) = args.kinds {
        cfg.eval.iou_kinds = k;
    }
    if let Some(t) = args.thresholds {
        cfg.eval.thresholds = t;
    }
    let cfg = cfg.resolve()?;
    let out = cfg.out_dir()?.to_path_buf();
    let mut dets = read_label_dir(&args.pred, true, Provenance::Prediction)?;
    fill_scores(&mut dets);
    let gts = read_label_dir(&args.gt, true, Provenance::GroundTruth)?;
    let report: EvalReport =
        evaluate(&dets, &gts, &cfg.eval.iou_kinds, &cfg.eval.thresholds, &cfg.eval.rule).map_err(usage)?;
    write_json(&out.join("report.json"), &report)?;
    let csv = report.to_csv();
    std::fs::write(out.join("report.csv"), &csv)?;
    cfg.write_resolved(&out)?;
    print!("{csv}");
    Ok(())
}
