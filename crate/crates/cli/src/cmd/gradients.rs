use std::path::PathBuf;

use clap::Args;
use weak3d::geometry3d::check_giou_gradients;
use weak3d::kitti_io::Calibration;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::split::write_json;

#[derive(Debug, Args)]
pub struct GradientArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Relative error tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Negate one partial of the analytic gradient.
    #[arg(long, hide = true)]
    pub inject_bug: Option<usize>,
    /// Write the trial table as JSON into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: GradientArgs, mut cfg: PipelineConfig) -> CliResult<()> {
    let g = &mut cfg.gradients;
    g.trials = args.trials.unwrap_or(g.trials);
    g.rel_tol = args.tol.unwrap_or(g.rel_tol);
    g.inject_bug = args.inject_bug.or(g.inject_bug);
    if let Some(o) = args.out {
        cfg.out_dir = Some(o);
    }
    let cfg = cfg.resolve()?;
    let trials = check_giou_gradients(&cfg.gradients, &Calibration::kitti_like());
    println!("{:>5}  {:>9}  {:>10}  result", "trial", "giou", "rel_error");
    for t in &trials {
        println!(
            "{:>5}  {:>9.5}  {:>10.3e}  {}",
            t.trial,
            t.giou,
            t.rel_error,
            if t.pass { "pass" } else { "FAIL" }
        );
    }
    let failed = trials.iter().filter(|t| !t.pass).count();
    println!("{} of {} trials passed", trials.len() - failed, trials.len());
    if let Some(out) = &cfg.out_dir {
        write_json(&out.join("gradients.json"), &trials)?;
        cfg.write_resolved(out)?;
    }
    if failed > 0 {
        return Err(CliError::Internal(anyhow::anyhow!("{failed} gradient trials failed")));
    }
    Ok(())
}
