use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use weak3d::eval::RecallTable;
use weak3d::kitti_io::{dirs, parse_mask, FrameLabelSet, Provenance, SplitLayout};
use weak3d::pseudo_label::{
    self_training, AbortCause, FilterConfig, RefineFrame, RoundCounts, SimulatedDetector, Trajectory,
};

use crate::config::PipelineConfig;
use crate::error::{usage, CliError, CliResult};
use crate::split::{read_calib, read_label_dir, read_labels, require_dir, write_json, write_label_dir};
use crate::DataArgs;

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Initial 3D labels, e.g. the `label/` output of `init-labels`.
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_rounds: Option<u32>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub nms_iou: Option<f64>,
    /// Stop once recall at 3D IoU 0.7 improves by less than this.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub counts: RoundCounts,
    pub recall: Option<RecallTable>,
    pub filter: FilterConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub initial_recall: Option<RecallTable>,
    pub rounds: Vec<RoundReport>,
    pub converged: bool,
    /// Recall at 3D IoU 0.7: initial labels, then each round.
    pub recall_3d_07: Option<Vec<f64>>,
    /// Set when the loop stopped early.
    pub aborted: Option<String>,
}

impl TrajectoryReport {
    pub fn new(t: &Trajectory, filter: &FilterConfig, aborted: Option<String>) -> Self {
        Self {
            initial_recall: t.initial_recall.clone(),
            rounds: t
                .rounds
                .iter()
                .map(|r| RoundReport {
                    round: r.round,
                    counts: r.counts,
                    recall: r.recall.clone(),
                    filter: *filter,
                })
                .collect(),
            converged: t.converged,
            recall_3d_07: t.recall_at_07(),
            aborted,
        }
    }
}

/// 2D confidence per annotation; annotations without a score count as 1.
pub fn sigma_i(annos: &FrameLabelSet) -> Vec<f64> {
    annos.objects.iter().map(|o| o.box2d.score.unwrap_or(1.0)).collect()
}

/// Frames and initial labels of a split, sorted by frame id. Frames
/// without initial labels start from an empty set.
pub fn load_split(layout: &SplitLayout, init: &[FrameLabelSet]) -> CliResult<(Vec<RefineFrame>, Vec<FrameLabelSet>)> {
    for d in [dirs::LABEL_2, dirs::CALIB, dirs::GT_3D] {
        require_dir(&layout.dir(d))?;
    }
    let mut frames = Vec::new();
    let mut initial = Vec::new();
    for id in layout.frame_ids()? {
        let annos = read_labels(&layout.label(&id), &id, false, Provenance::GroundTruth)?;
        let calib = read_calib(&layout.calib(&id))?;
        let gt = read_labels(&layout.gt_3d(&id), &id, true, Provenance::GroundTruth)?;
        let mask = layout.mask(&id);
        let extent = if mask.is_file() {
            let bytes = std::fs::read(&mask)?;
            Some(parse_mask(&bytes).map_err(usage)?.0)
        } else {
            None
        };
        initial.push(
            init.iter()
                .find(|s| s.frame_id == id)
                .cloned()
                .unwrap_or_else(|| FrameLabelSet::new(id.clone(), Provenance::Initial)),
        );
        frames.push(RefineFrame {
            sigma_i: sigma_i(&annos),
            annos,
            calib,
            extent,
            gt: Some(gt),
        });
    }
    Ok((frames, initial))
}

pub fn run(args: RefineArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(o) = args.out {
        cfg.out_dir = Some(o);
    }
    let f = &mut cfg.filter;
    f.max_rounds = args.max_rounds.unwrap_or(f.max_rounds);
    f.alpha0 = args.alpha0.unwrap_or(f.alpha0);
    f.alpha1 = args.alpha1.unwrap_or(f.alpha1);
    f.alpha2 = args.alpha2.unwrap_or(f.alpha2);
    f.nms_iou = args.nms_iou.unwrap_or(f.nms_iou);
    f.convergence_eps = args.eps.unwrap_or(f.convergence_eps);
    let cfg = cfg.resolve()?;
    let out = cfg.out_dir()?.to_path_buf();
    let layout = SplitLayout::new(cfg.data_root()?, &cfg.split);
    let init = read_label_dir(&args.init, true, Provenance::Initial)?;
    let (frames, initial) = load_split(&layout, &init)?;

    let truth = frames
        .iter()
        .map(|f| (f.gt.clone().expect("loaded above"), f.calib.clone()))
        .collect();
    let mut detector = SimulatedDetector::new(truth, cfg.detector);
    let (traj, abort) = match self_training(&initial, &frames, &mut detector, &cfg.filter) {
        Ok(t) => (t, None),
        Err(a) => (a.completed, Some(a.cause)),
    };

    cfg.write_resolved(&out)?;
    for r in &traj.rounds {
        let dir = out.join(format!("round_{}", r.round));
        write_label_dir(&dir.join("label"), &r.labels, true)?;
        write_json(
            &dir.join("report.json"),
            &RoundReport {
                round: r.round,
                counts: r.counts,
                recall: r.recall.clone(),
                filter: cfg.filter,
            },
        )?;
    }
    let report = TrajectoryReport::new(&traj, &cfg.filter, abort.as_ref().map(|c| c.to_string()));
    write_json(&out.join("trajectory.json"), &report)?;
    if let Some(r) = &report.recall_3d_07 {
        let s: Vec<String> = r.iter().map(|v| format!("{v:.4}")).collect();
        println!("recall@3D IoU 0.7: {}", s.join(" -> "));
    }
    match abort {
        None => Ok(()),
        Some(AbortCause::Config(e)) => Err(usage(e)),
        Some(cause) => Err(CliError::Internal(cause.into())),
    }
}
