mod commands;
mod plot;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Shape-aware human motion retargeting toolkit.
#[derive(Parser)]
#[command(name = "retarget", version, about)]
struct Cli {
    /// Config file with parameter overrides (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed recorded in the run manifest and used by synthetic generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth a motion: spline fit, outlier rejection, per-frame refit.
    Reconstruct {
        /// Input motion JSON.
        #[arg(long)]
        motion: PathBuf,
        /// Skeleton JSON (bundled default skeleton if omitted).
        #[arg(long)]
        skeleton: Option<PathBuf>,
        /// Scale between angle anchor and spline position term.
        #[arg(long)]
        gamma: Option<f64>,
        /// Smoothing-spline half-power cutoff in Hz.
        #[arg(long)]
        cutoff_hz: Option<f64>,
        /// MAD multiplier for outlier flagging.
        #[arg(long)]
        outlier_k: Option<f64>,
        /// Optimizer iterations per frame.
        #[arg(long)]
        iterations: Option<usize>,
        /// Optimizer learning rate.
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Retarget a motion to a different body shape under constraints.
    Retarget {
        /// Source motion JSON.
        #[arg(long)]
        motion: PathBuf,
        /// Skeleton JSON (bundled default skeleton if omitted).
        #[arg(long)]
        skeleton: Option<PathBuf>,
        /// Target shape: JSON file with {"beta": [...]} or a motion file.
        #[arg(long)]
        target_beta: PathBuf,
        /// Constraint JSON file.
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Camera JSON (required by 2D constraints).
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long)]
        lambda1: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        lambda3: Option<f64>,
        /// Temporal window length in seconds.
        #[arg(long)]
        window_seconds: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Add an unpenalized per-frame root-translation offset.
        #[arg(long)]
        optimize_root_translation: bool,
    },
    /// Deform a labeled mesh to fit a semantic label image.
    Deform {
        /// Mesh OBJ.
        #[arg(long)]
        mesh: PathBuf,
        /// Label sidecar (one part id per vertex line).
        #[arg(long)]
        labels: PathBuf,
        /// Semantic label image (PNG/PGM gray or JSON matrix).
        #[arg(long)]
        label_image: PathBuf,
        /// Camera JSON.
        #[arg(long)]
        camera: PathBuf,
        /// Contour subsampling stride in pixels.
        #[arg(long)]
        stride: Option<usize>,
        /// Local-global iterations.
        #[arg(long)]
        iterations: Option<usize>,
        /// Relative energy-change stopping tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Soft control-constraint penalty weight.
        #[arg(long)]
        penalty: Option<f64>,
        /// Uniform Laplacian weights instead of cotangents.
        #[arg(long)]
        uniform_weights: bool,
    },
    /// Score predicted frames and/or a motion against references.
    Eval {
        /// Directory of predicted frames (PNG/PGM, sorted by name).
        #[arg(long)]
        pred_frames: Option<PathBuf>,
        /// Directory of reference frames.
        #[arg(long)]
        ref_frames: Option<PathBuf>,
        /// Motion JSON to score against constraints.
        #[arg(long)]
        pred_motion: Option<PathBuf>,
        /// Skeleton JSON (bundled default skeleton if omitted).
        #[arg(long)]
        skeleton: Option<PathBuf>,
        /// Constraint JSON for end-effector error.
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Camera JSON for end-effector error.
        #[arg(long)]
        camera: Option<PathBuf>,
        /// Acceptance window override (computed from lengths when absent).
        #[arg(long)]
        window: Option<usize>,
        /// Average SSIM over color channels instead of luma.
        #[arg(long)]
        ssim_per_channel: bool,
    },
    /// Plot a joint-coordinate trajectory of one or more motions.
    Plot {
        /// Motion JSON, repeatable; curves are drawn in order.
        #[arg(long, required = true)]
        motion: Vec<PathBuf>,
        /// Comma-separated curve labels matching the motion count.
        #[arg(long)]
        labels: Option<String>,
        /// Joint name (per skeleton joint_names) or index.
        #[arg(long)]
        joint: String,
        /// Coordinate axis: x, y, or z.
        #[arg(long, default_value = "y")]
        axis: String,
        /// Skeleton JSON (bundled default skeleton if omitted).
        #[arg(long)]
        skeleton: Option<PathBuf>,
        /// Constraint JSON; frames constraining the joint are marked.
        #[arg(long)]
        constraints: Option<PathBuf>,
    },
    /// Generate a synthetic paired scenario (motions + constraints).
    Synth {
        /// Template id: walk, jump, pickup-box, touch-cone.
        #[arg(long)]
        template: String,
        /// Clip length in seconds.
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        /// Uniform target/source size ratio (sets β₀ of the target).
        #[arg(long, default_value_t = 1.0)]
        shape_ratio: f64,
        /// Gaussian angle noise σ on the source motion (radians).
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        /// Spike outliers injected into the source motion.
        #[arg(long, default_value_t = 0)]
        spikes: usize,
        /// Spike rotation magnitude (radians).
        #[arg(long, default_value_t = 1.5)]
        spike_magnitude: f64,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    let result = commands::run(&cli, argv);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
