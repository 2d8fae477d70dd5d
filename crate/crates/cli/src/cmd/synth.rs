use clap::Args;
use rayon::prelude::*;
use weak3d::kitti_io::{dirs, frame_id, generate_synthetic_scene, scene_seed, SplitLayout};

use crate::config::PipelineConfig;
use crate::error::{usage, CliResult};
use crate::DataArgs;

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of frames to generate.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Per-point Gaussian noise, meters.
    #[arg(long)]
    pub point_noise: Option<f64>,
}

pub fn run(args: SynthArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    if let Some(n) = args.frames {
        cfg.synth.frames = n;
    }
    if let Some(s) = args.point_noise {
        cfg.synth.scene.point_noise = s;
    }
    let cfg = cfg.resolve()?;
    let layout = SplitLayout::new(cfg.data_root()?, &cfg.split);
    for d in [dirs::LABEL_2, dirs::CALIB, dirs::VELODYNE, dirs::FG_MASK, dirs::GT_3D] {
        std::fs::create_dir_all(layout.dir(d))?;
    }
    let results: Vec<CliResult<()>> = (0..cfg.synth.frames)
        .into_par_iter()
        .map(|i| {
            let id = frame_id(i);
            let scene = generate_synthetic_scene(scene_seed(cfg.seed, i), &cfg.synth.scene).map_err(usage)?;
            let files = scene.to_files().map_err(anyhow::Error::from)?;
            std::fs::write(layout.label(&id), files.label_2)?;
            std::fs::write(layout.calib(&id), files.calib)?;
            std::fs::write(layout.velodyne(&id), files.velodyne)?;
            std::fs::write(layout.mask(&id), files.fg_mask)?;
            std::fs::write(layout.gt_3d(&id), files.gt_3d)?;
            Ok(())
        })
        .collect();
    results.into_iter().collect::<CliResult<Vec<()>>>()?;
    cfg.write_resolved(&layout.base)?;
    log::info!("wrote {} frames to {}", cfg.synth.frames, layout.base.display());
    Ok(())
}
