use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vgaze_core::evaluate::{evaluate as score, write_error_series_csv, EvalParams};
use vgaze_core::io::{load_corpus, read_jsonl, read_selection_csv, read_truth, selection_path, write_json, write_jsonl, write_scenario, write_selection_csv};
use vgaze_core::session::Timings;
use vgaze_core::{frames_cost, generate_scenario, run as run_pipeline, simulate_rough_gaze, Corpus, RunConfig, ScenarioConfig};

use crate::{EvaluateArgs, Overrides, RunArgs, SweepArgs};

/// 1 for bad input or configuration, 2 for anything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let user = e
        .chain()
        .any(|c| c.is::<vgaze_core::Error>() || c.is::<std::io::Error>() || c.is::<serde_json::Error>());
    if user {
        1
    } else {
        2
    }
}

pub fn simulate(scenario: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let config = ScenarioConfig::from_json(&text).with_context(|| format!("scenario {}", scenario.display()))?;
    let s = generate_scenario(&config)?;
    let trace = simulate_rough_gaze(&s.truth, &config);
    let manifest = write_scenario(out_dir, &s, &trace)?;
    println!("corpus      {}", out_dir.display());
    println!("frames      {} at {} fps, {}x{}", manifest.frames.len(), manifest.fps, manifest.width, manifest.height);
    println!("gaze        {} samples, {} blinks", trace.samples.len(), trace.blinks.len());
    println!("poses       {}", trace.poses.len());
    println!("cuts        {:?}", s.truth.cuts);
    println!(
        "offsets     {}",
        config
            .offsets
            .iter()
            .map(|c| format!("frame {}: ({}, {})", c.from_frame, c.offset.x, c.offset.y))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("pose jumps  {:?}", s.truth.pose_jumps);
    if manifest.history.is_some() {
        println!("history     {} viewers", config.history_users);
    }
    Ok(())
}

fn resolve_config(o: &Overrides, corpus: &Corpus) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = o.bin_threshold {
        c.bin_threshold = v;
    }
    if let Some(v) = o.scs_threshold {
        c.scs_threshold = v;
    }
    if let Some(v) = o.window_n {
        c.window_n = v;
    }
    if let Some(v) = o.zscore_alpha {
        c.zscore_alpha = v;
    }
    if let Some(v) = o.cluster_epsilon {
        c.cluster_epsilon = v;
    }
    if let Some(v) = o.head_move_threshold {
        c.head_move_threshold = v;
    }
    if let Some(v) = o.orientation {
        c.orientation = v;
    }
    if o.no_recalibration {
        c.recalibration = false;
    }
    if o.no_zscore {
        c.zscore = false;
    }
    if o.all_frames_key {
        c.all_frames_key = true;
    }
    match &o.history {
        Some(None) => {
            let shipped = corpus
                .history
                .clone()
                .ok_or_else(|| vgaze_core::Error::InvalidArgument("--history given without a path, and the corpus ships no history".into()))?;
            c.history = Some(shipped);
        }
        Some(Some(p)) => c.history = Some(p.clone()),
        None => {}
    }
    if o.threads == 0 {
        return Err(vgaze_core::Error::InvalidArgument("--threads must be at least 1".into()).into());
    }
    c.validate()?;
    Ok(c)
}

fn timing_table(t: &Timings) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>12} {:>12}", "component", "total ms", "ms/item");
    for (name, total, per) in t.rows() {
        let _ = writeln!(s, "{:<20} {:>12.3} {:>12.4}", name, total.as_secs_f64() * 1e3, per);
    }
    let frame_path = t.downscale + t.bottom_up + t.selection;
    let fps = if frame_path.is_zero() { f64::INFINITY } else { t.frames as f64 / frame_path.as_secs_f64() };
    let _ = writeln!(s, "{} frames, {} gaze samples; frame path {:.0} frames/s", t.frames, t.gazes, fps);
    s
}

pub fn run(args: &RunArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let config = resolve_config(&args.overrides, &corpus)?;
    let out = run_pipeline(&corpus, &config, args.overrides.threads)?;
    write_jsonl(&args.out, &out.records)?;
    let sidecar = selection_path(&args.out);
    write_selection_csv(&sidecar, &out.selections)?;
    eprint!("{}", timing_table(&out.timings));
    println!(
        "{} records, {} transforms -> {} (selection: {})",
        out.records.len(),
        out.transforms.len(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let records = read_jsonl(&args.output)?;
    let truth = read_truth(&args.truth)?;
    let selection_file: Option<PathBuf> = match &args.selection {
        Some(p) => Some(p.clone()),
        None => Some(selection_path(&args.output)).filter(|p| p.exists()),
    };
    let selections = selection_file.as_deref().map(read_selection_csv).transpose()?;
    if let Some(d) = args.screen_diag_cm {
        if !(d.is_finite() && d > 0.0) {
            bail!(vgaze_core::Error::InvalidArgument("--screen-diag-cm must be positive".into()));
        }
    }
    if !(args.view_dist_cm.is_finite() && args.view_dist_cm > 0.0) {
        bail!(vgaze_core::Error::InvalidArgument("--view-dist-cm must be positive".into()));
    }
    let params = EvalParams {
        screen_diag_cm: args.screen_diag_cm,
        aspect: args.aspect,
        view_dist_cm: args.view_dist_cm,
    };
    let (report, series) = score(&records, &truth, selections.as_deref(), &params)
        .with_context(|| format!("{} against {}", args.output.display(), args.truth.display()))?;
    if let Some(p) = &args.series {
        write_error_series_csv(p, &series)?;
    }
    match &args.report {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    if args.bin.is_empty() || args.scs.is_empty() {
        bail!(vgaze_core::Error::InvalidArgument("sweep needs at least one value per axis".into()));
    }
    let corpus = load_corpus(&args.corpus)?;
    let base = resolve_config(&args.overrides, &corpus)?;
    let mut cells = Vec::new();
    for &bin in &args.bin {
        for &scs in &args.scs {
            let config = RunConfig {
                bin_threshold: bin,
                scs_threshold: scs,
                ..base.clone()
            };
            config.validate()?;
            let out = run_pipeline(&corpus, &config, args.overrides.threads)?;
            cells.push((bin, scs, frames_cost(&out.selections, 30)));
        }
    }
    let show = |c: Option<f64>| c.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let mut table = format!("{:<8}", "bin\\scs");
    for scs in &args.scs {
        let _ = write!(table, " {:>10}", scs);
    }
    table.push('\n');
    for &bin in &args.bin {
        let _ = write!(table, "{:<8}", bin);
        for &(_, _, cost) in cells.iter().filter(|c| c.0 == bin) {
            let _ = write!(table, " {:>10}", show(cost));
        }
        table.push('\n');
    }
    print!("{table}");
    if let Some(p) = &args.out {
        let mut csv = String::from("bin_threshold,scs_threshold,frames_cost\n");
        for (bin, scs, cost) in &cells {
            let _ = writeln!(csv, "{bin},{scs},{}", cost.map_or_else(String::new, |v| v.to_string()));
        }
        std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
