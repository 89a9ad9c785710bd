//! `monovo`: run the odometry pipeline, evaluate trajectories, export
//! synthetic datasets and plot trajectories.

mod manifest;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use monovo::dataio::read_kitti_poses;
use monovo::eval::{evaluate, AlignMode};
use monovo::synth::{export_kitti, generate_scene_with, SceneMode, SceneParams};

#[derive(Parser)]
#[command(
    name = "monovo",
    version,
    about = "Monocular visual odometry with depth-map scale recovery"
)]
struct Cli {
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on a KITTI-layout sequence.
    Run(run::RunArgs),
    /// Compare an estimated pose file against ground truth.
    Eval(EvalArgs),
    /// Export a synthetic scene in KITTI layout.
    Synth(SynthArgs),
    /// Draw top-down (XZ) trajectories as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated poses (KITTI format).
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth poses (KITTI format).
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value = "none")]
    align: AlignMode,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Dataset root to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "00")]
    seq: String,
    /// general, planar or rotation.
    #[arg(long, default_value = "general")]
    mode: SceneMode,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Meters per frame.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Relative amplitude of a slow speed modulation.
    #[arg(long, default_value_t = 0.0)]
    speed_variation: f64,
    /// Skip writing depth maps.
    #[arg(long)]
    no_depth: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Estimated pose files.
    #[arg(required = true)]
    poses: Vec<PathBuf>,
    /// Ground truth, drawn dashed.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let est = read_kitti_poses(&args.est)?;
    let gt = read_kitti_poses(&args.gt)?;
    let report = evaluate(&est, &gt, args.align).context("evaluation failed")?;
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, text + "\n").with_context(|| format!("{}", path.display()))?;
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    anyhow::ensure!(
        args.points >= 1 && args.frames >= 2,
        "need at least 1 point and 2 frames"
    );
    anyhow::ensure!(
        args.speed.is_finite() && args.speed >= 0.0,
        "speed must be non-negative"
    );
    let params = SceneParams {
        speed: args.speed,
        speed_variation: args.speed_variation,
        ..Default::default()
    };
    let scene = generate_scene_with(args.mode, args.points, args.frames, args.seed, &params);
    let depth_root = args.out.join("depth");
    export_kitti(
        &scene,
        &args.out,
        &args.seq,
        (!args.no_depth).then_some(depth_root.as_path()),
    )?;
    println!(
        "wrote {} frames of {:?} scene to {}",
        scene.len(),
        args.mode,
        args.out.display()
    );
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let mut series = Vec::new();
    for path in &args.poses {
        let label = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into(),
        );
        series.push(plot::Series {
            label,
            positions: read_kitti_poses(path)?.positions(),
            dashed: false,
        });
    }
    if let Some(gt) = &args.gt {
        series.push(plot::Series {
            label: "ground truth".into(),
            positions: read_kitti_poses(gt)?.positions(),
            dashed: true,
        });
    }
    let svg = plot::render_svg(&series);
    std::fs::write(&args.out, svg).with_context(|| format!("{}", args.out.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Run(a) => run::cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
