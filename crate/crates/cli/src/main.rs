use std::path::PathBuf;
use std::process::ExitCode;

use bubbletrack::evaluation::IouMode;
use bubbletrack_cli::pipeline::write_setup_failure;
use bubbletrack_cli::{execute, CliError, Command, Overrides, RunConfig, Settings};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bubbletrack", version, about = "Bubble tracking and interface dynamics for segmented boiling videos")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Assign persistent track ids; writes tracks.json.
    Track(Common),
    /// Per-frame and per-track features, departures and diameter histogram.
    Features(Common),
    /// Interface-velocity spectrograms and max-speed series.
    Velocity {
        #[command(flatten)]
        common: Common,
        /// Only this track (default: every track with a frame pair).
        #[arg(long)]
        track_id: Option<u64>,
    },
    /// AP, AP50, AP75 and per-class AP against ground truth.
    Evaluate(Common),
    /// track, features, velocity, and evaluate when ground truth is given.
    All(Common),
    /// Convert COCO annotations/results into the ingestion format.
    ConvertCoco {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pixels_per_cm: f64,
        #[arg(long)]
        fps: f64,
        /// Output file (default: <out-dir>/dataset.json).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Mask,
    Box,
}

#[derive(Args, Debug)]
struct Common {
    /// Predictions in the ingestion JSON format.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// TOML file with [tracker], [kinematics], [analytics], [evaluation].
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for per-frame and per-track work.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    #[arg(long)]
    delta_frames: Option<u64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    sigma_pos: Option<f64>,
    #[arg(long)]
    sigma_time: Option<f64>,
    #[arg(long)]
    debounce: Option<usize>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    #[arg(long)]
    histogram_bin_mm: Option<f64>,
    #[arg(long, value_enum)]
    eval_mode: Option<Mode>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let settings = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let overrides = Overrides {
            delta_frames: self.delta_frames,
            bins: self.bins,
            sigma_position: self.sigma_pos,
            sigma_time: self.sigma_time,
            debounce: self.debounce,
            iou_threshold: self.iou_threshold,
            stride: self.stride,
            histogram_bin_mm: self.histogram_bin_mm,
            eval_mode: self.eval_mode.map(|m| match m {
                Mode::Mask => IouMode::Mask,
                Mode::Box => IouMode::Box,
            }),
        };
        Ok(RunConfig {
            input: self.input.clone(),
            ground_truth: self.ground_truth.clone(),
            out_dir: self.out_dir.clone(),
            workers: self.workers as usize,
            settings: settings.apply(&overrides),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let (command, common) = match &cli.command {
        Sub::Track(c) => (Command::Track, c),
        Sub::Features(c) => (Command::Features, c),
        Sub::Velocity { common, track_id } => (Command::Velocity { track_id: *track_id }, common),
        Sub::Evaluate(c) => (Command::Evaluate, c),
        Sub::All(c) => (Command::All, c),
        Sub::ConvertCoco { common, pixels_per_cm, fps, output } => (
            Command::ConvertCoco { pixels_per_cm: *pixels_per_cm, frame_rate: *fps, output: output.clone() },
            common,
        ),
    };
    let result = match common.run_config() {
        Ok(config) => execute(&command, &config),
        Err(e) => {
            write_setup_failure(&command, &common.out_dir, &e);
            Err(e)
        }
    };
    match result {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
