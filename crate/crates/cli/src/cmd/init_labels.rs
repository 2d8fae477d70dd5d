use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use weak3d::frustum_labeler::{label_frame, InitialLabelReport};
use weak3d::kitti_io::{dirs, FrameLabelSet, Provenance, SplitLayout};

use crate::config::PipelineConfig;
use crate::error::CliResult;
use crate::split::{read_calib, read_cloud, read_labels, require_dir, write_json, write_label_dir};
use crate::DataArgs;

#[derive(Debug, Args)]
pub struct InitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for `label/` and `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Frustum expansion in pixels.
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub total: InitialLabelReport,
    pub frames: Vec<InitialLabelReport>,
}

/// Keep fitted objects (and `DontCare` regions) so the set can be written
/// in 3D mode.
pub fn fitted_only(set: &FrameLabelSet) -> FrameLabelSet {
    let mut out = set.clone();
    out.objects.retain(|o| o.box3d.is_some() || o.is_dont_care());
    out
}

pub fn run(args: InitArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(o) = args.out {
        cfg.out_dir = Some(o);
    }
    if let Some(m) = args.margin {
        cfg.frustum.margin = m;
    }
    let cfg = cfg.resolve()?;
    let out = cfg.out_dir()?.to_path_buf();
    let layout = SplitLayout::new(cfg.data_root()?, &cfg.split);
    for d in [dirs::LABEL_2, dirs::CALIB, dirs::VELODYNE] {
        require_dir(&layout.dir(d))?;
    }
    let ids = layout.frame_ids()?;
    let results: Vec<CliResult<(FrameLabelSet, InitialLabelReport)>> = ids
        .par_iter()
        .map(|id| {
            let annos = read_labels(&layout.label(id), id, false, Provenance::GroundTruth)?;
            let calib = read_calib(&layout.calib(id))?;
            let cloud = read_cloud(&layout.velodyne(id))?;
            Ok(label_frame(&cloud, &annos, &calib, &cfg.frustum))
        })
        .collect();
    let mut sets = Vec::with_capacity(ids.len());
    let mut total = InitialLabelReport::empty("all");
    let mut frames = Vec::with_capacity(ids.len());
    for r in results {
        let (set, report) = r?;
        if report.rejections.total() > 0 {
            log::info!("{}: {} of {} objects rejected", report.frame_id, report.rejections.total(), report.attempted);
        }
        total.merge(&report);
        sets.push(fitted_only(&set));
        frames.push(report);
    }
    write_label_dir(&out.join("label"), &sets, true)?;
    write_json(&out.join("report.json"), &InitReport { total: total.clone(), frames })?;
    cfg.write_resolved(&out)?;
    println!("fitted {} of {} objects", total.fitted, total.attempted);
    Ok(())
}
