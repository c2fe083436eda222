//! `vgaze`: generate simulated corpora, run the calibration pipeline over
//! them, and score the output against ground truth.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vgaze_core::Orientation;

#[derive(Debug, Parser)]
#[command(name = "vgaze", version, about = "Saliency-aware implicit gaze calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a corpus (frames, gaze and pose traces, ground truth) from a scenario file.
    Simulate {
        scenario: PathBuf,
        out_dir: PathBuf,
    },
    /// Run the tracker over a corpus and write the calibrated gaze stream as JSON lines.
    Run(RunArgs),
    /// Score an output stream against ground truth.
    Evaluate(EvaluateArgs),
    /// Frames-cost table over binarization and concentration thresholds.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON run configuration; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bin_threshold: Option<u8>,
    #[arg(long)]
    scs_threshold: Option<f64>,
    #[arg(long)]
    window_n: Option<usize>,
    #[arg(long)]
    zscore_alpha: Option<f64>,
    #[arg(long)]
    cluster_epsilon: Option<f64>,
    #[arg(long)]
    head_move_threshold: Option<f64>,
    #[arg(long, value_parser = parse_orientation)]
    orientation: Option<Orientation>,
    /// Keep the first transform for the whole run.
    #[arg(long)]
    no_recalibration: bool,
    /// Skip the per-window z-score outlier filter.
    #[arg(long)]
    no_zscore: bool,
    /// Check every frame for scene cuts, not only key frames.
    #[arg(long)]
    all_frames_key: bool,
    /// Other viewers' gaze CSV; without a value, the one shipped with the corpus.
    #[arg(long)]
    history: Option<Option<PathBuf>>,
    /// Worker threads for bottom-up saliency.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    output: PathBuf,
    truth: PathBuf,
    /// Per-frame selection CSV; defaults to the sidecar written by `run` when present.
    #[arg(long)]
    selection: Option<PathBuf>,
    #[arg(long)]
    screen_diag_cm: Option<f64>,
    /// Screen width:height proportions.
    #[arg(long, default_value = "9:19.5", value_parser = parse_aspect)]
    aspect: (f64, f64),
    #[arg(long, default_value_t = 30.0)]
    view_dist_cm: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-sample error CSV.
    #[arg(long)]
    series: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "128,170")]
    bin: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.8")]
    scs: Vec<f64>,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "portrait" => Ok(Orientation::Portrait),
        "landscapeleft" => Ok(Orientation::LandscapeLeft),
        "landscaperight" => Ok(Orientation::LandscapeRight),
        _ => Err(format!("unknown orientation `{s}` (portrait, landscape-left, landscape-right)")),
    }
}

fn parse_aspect(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s.split_once(':').ok_or_else(|| format!("expected W:H, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w > 0.0 && h > 0.0 {
        Ok((w, h))
    } else {
        Err("aspect components must be positive".into())
    }
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        eprintln!("internal error: {info}");
        std::process::exit(2);
    }));
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { scenario, out_dir } => commands::simulate(&scenario, &out_dir),
        Command::Run(args) => commands::run(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Sweep(args) => commands::sweep(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
