use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use monovo::dataio::{write_kitti_poses, FrameSource, SequenceSource};
use monovo::pipeline::{process_sequence, write_decisions, PipelineConfig};

use crate::manifest::{load_config, RunManifest};

#[derive(Args)]
pub struct RunArgs {
    /// KITTI-layout dataset root (contains `sequences/`).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seq: Option<String>,
    /// Depth root holding `<seq>/NNNNNN.pfm`.
    #[arg(long)]
    depth: Option<PathBuf>,
    /// Multiplier applied to depth values.
    #[arg(long)]
    depth_scale: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeat the run recorded in this manifest (flags still override).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let previous = args
        .manifest
        .as_deref()
        .map(RunManifest::load)
        .transpose()?;
    let mut cfg = match (&args.config, &previous) {
        (Some(path), _) => load_config(path)?,
        (None, Some(m)) => m.config.clone(),
        (None, None) => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = args.depth_scale {
        cfg.depth_scale = d;
    }
    if let Err(e) = cfg.validate() {
        bail!("invalid configuration: {e}");
    }
    let dataset = args
        .dataset
        .clone()
        .or_else(|| previous.as_ref().map(|m| m.dataset.clone()))
        .context("--dataset is required")?;
    let seq = args
        .seq
        .clone()
        .or_else(|| previous.as_ref().map(|m| m.seq.clone()))
        .context("--seq is required")?;
    let depth = args
        .depth
        .clone()
        .or_else(|| previous.as_ref().and_then(|m| m.depth.clone()));
    let out = args
        .out
        .clone()
        .or_else(|| {
            previous
                .as_ref()
                .and_then(|m| m.poses.parent().map(PathBuf::from))
        })
        .context("--out is required")?;

    let depth = match depth {
        Some(d) if !d.join(&seq).is_dir() => {
            log::warn!(
                "depth directory {} not found; running without scale recovery",
                d.join(&seq).display()
            );
            eprintln!(
                "warning: no depth maps under {}; scale recovery disabled",
                d.join(&seq).display()
            );
            None
        }
        other => other,
    };
    let src = SequenceSource::open(&dataset, &seq, depth.as_deref())?;
    std::fs::create_dir_all(&out).with_context(|| format!("{}", out.display()))?;
    let start = Instant::now();
    let (trajectory, decisions) = process_sequence(&src, &cfg)?;
    let duration = start.elapsed().as_secs_f64();

    let poses = out.join(format!("{seq}_poses.txt"));
    let log_path = out.join(format!("{seq}_decisions.jsonl"));
    write_kitti_poses(&trajectory, &poses)?;
    write_decisions(&decisions, &log_path)?;
    let manifest = RunManifest {
        dataset,
        seq: seq.clone(),
        depth,
        seed: cfg.seed,
        config: cfg,
        poses: poses.clone(),
        decisions: log_path,
        frames: src.len(),
        threads: rayon::current_num_threads(),
        duration_s: duration,
    };
    manifest.save(&out.join(format!("{seq}_manifest.json")))?;
    println!(
        "{} poses written to {} in {duration:.2}s",
        trajectory.len(),
        poses.display()
    );
    Ok(())
}
