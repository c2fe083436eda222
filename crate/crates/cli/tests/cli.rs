//! The `vgaze` binary driven end to end through its command line.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn vgaze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vgaze")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Simulates `scenario_path` and runs it; returns the corpus dir and output path.
fn simulate_and_run(dir: &Path, scenario_path: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus");
    let out = dir.join("out.jsonl");
    ok(vgaze(&["simulate", scenario_path, s(&corpus)]));
    let mut args = vec!["run", s(&corpus), "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(vgaze(&args));
    (corpus, out)
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn transform_sources(path: &Path) -> Vec<String> {
    records(path)
        .iter()
        .filter_map(|r| r.get("source").map(|s| s.as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn simulate_writes_a_complete_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let out = ok(vgaze(&["simulate", &scenario("hard_cut.json"), s(&corpus)]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("frames      90"));
    for f in ["manifest.json", "truth.json", "gaze.csv", "pose.csv", "frame_000000.pgm", "frame_000089.pgm"] {
        assert!(corpus.join(f).is_file(), "{f} missing");
    }
    let again = dir.path().join("c2");
    ok(vgaze(&["simulate", &scenario("hard_cut.json"), s(&again)]));
    for f in ["manifest.json", "truth.json", "gaze.csv", "pose.csv", "frame_000045.pgm"] {
        assert_eq!(std::fs::read(corpus.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn malformed_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"segments": [{"kind": "SingleBlob", "length_frames": -3}]}"#).unwrap();
    let out = vgaze(&["simulate", s(&bad), s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("segments[0].length_frames"));

    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(vgaze(&["simulate", s(&bad), s(&dir.path().join("c"))]).status.code(), Some(1));
}

#[test]
fn user_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let out = vgaze(&["run", s(&missing), "--out", s(&dir.path().join("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json"));
    assert_eq!(vgaze(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vgaze(&["run"]).status.code(), Some(1));
    assert_eq!(vgaze(&["--help"]).status.code(), Some(0));

    let (corpus, _) = simulate_and_run(dir.path(), &scenario("hard_cut.json"), &[]);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"window_n": 1}"#).unwrap();
    let out = vgaze(&["run", s(&corpus), "--out", s(&dir.path().join("o.jsonl")), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window_n"));
    let out = vgaze(&["run", s(&corpus), "--out", s(&dir.path().join("o.jsonl")), "--history"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn one_offset_gives_one_initial_transform() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = simulate_and_run(dir.path(), &scenario("single_offset.json"), &[]);
    assert_eq!(transform_sources(&out), vec!["Initial"]);
}

#[test]
fn pose_jumps_recalibrate_unless_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, out) = simulate_and_run(dir.path(), &scenario("three_jumps.json"), &[]);
    let head_moves = transform_sources(&out).iter().filter(|s| *s == "HeadMove").count();
    assert!(head_moves >= 3, "{head_moves}");

    let frozen = dir.path().join("frozen.jsonl");
    ok(vgaze(&["run", s(&corpus), "--out", s(&frozen), "--no-recalibration"]));
    assert!(transform_sources(&frozen).len() <= 1);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = simulate_and_run(dir.path(), &scenario("three_jumps.json"), &[]);
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"recalibration": true, "scs_threshold": 0.99}"#).unwrap();
    let out = dir.path().join("o.jsonl");
    ok(vgaze(&["run", s(&corpus), "--out", s(&out), "--config", s(&cfg), "--scs-threshold", "0.6", "--no-recalibration"]));
    assert_eq!(transform_sources(&out), vec!["Initial"]);
}

#[test]
fn zero_noise_loop_evaluates_to_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("clean.json");
    std::fs::write(
        &scenario_path,
        r#"{"seed": 4, "segments": [{"kind": "SingleBlob", "length_frames": 60}],
            "offsets": [{"from_frame": 0, "offset": [0.15, -0.08]}],
            "gaze_noise_sigma": 0.0, "blink_rate_per_min": 0.0, "walk_period": 0}"#,
    )
    .unwrap();
    let (corpus, out) = simulate_and_run(dir.path(), s(&scenario_path), &[]);
    let report = ok(vgaze(&["evaluate", s(&out), s(&corpus.join("truth.json"))]));
    let report: Value = serde_json::from_slice(&report.stdout).unwrap();
    let calibrated = &report["error"]["calibrated"];
    assert!(calibrated["count"].as_u64().unwrap() > 0);
    assert!(calibrated["mean"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["frames_cost"].as_f64(), Some(30.0));
}

#[test]
fn frozen_transform_keeps_the_old_offset_after_a_jump() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, out) = simulate_and_run(dir.path(), &scenario("pose_jump.json"), &["--no-recalibration"]);
    let series = dir.path().join("series.csv");
    ok(vgaze(&["evaluate", s(&out), s(&corpus.join("truth.json")), "--series", s(&series), "--report", s(&dir.path().join("r.json"))]));
    let text = std::fs::read_to_string(&series).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_ms,frame,error,calibrated"));
    let post: Vec<f64> = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|c| c[1].parse::<u64>().unwrap() >= 60)
        .map(|c| c[2].parse().unwrap())
        .collect();
    let mean = post.iter().sum::<f64>() / post.len() as f64;
    // the offset moves by 0.2 at frame 60; noise sigma is 0.01
    assert!(mean >= 0.2 - 2.0 * 0.01, "{mean}");
}

#[test]
fn report_matches_a_one_pass_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, out) = simulate_and_run(dir.path(), &scenario("mixed.json"), &[]);
    let report_path = dir.path().join("report.json");
    ok(vgaze(&["evaluate", s(&out), s(&corpus.join("truth.json")), "--report", s(&report_path), "--screen-diag-cm", "15", "--view-dist-cm", "40"]));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let truth: Value = serde_json::from_str(&std::fs::read_to_string(corpus.join("truth.json")).unwrap()).unwrap();
    let gaze_of = |frame: u64| {
        let g = &truth["frames"][frame as usize]["gaze"];
        (g[0].as_f64().unwrap(), g[1].as_f64().unwrap())
    };
    // 9:19.5 screen with a 15 cm diagonal
    let norm = (9.0f64 * 9.0 + 19.5 * 19.5).sqrt();
    let (w_cm, h_cm) = (15.0 * 9.0 / norm, 15.0 * 19.5 / norm);

    let (mut n, mut sum, mut cal_n, mut deg_sum) = (0usize, 0.0, 0usize, 0.0);
    let mut sources = std::collections::BTreeMap::<String, u64>::new();
    let mut all = Vec::new();
    for r in records(&out) {
        if let Some(src) = r.get("source") {
            *sources.entry(src.as_str().unwrap().to_string()).or_default() += 1;
            continue;
        }
        let (gx, gy) = gaze_of(r["frame"].as_u64().unwrap());
        let (dx, dy) = (r["x"].as_f64().unwrap() - gx, r["y"].as_f64().unwrap() - gy);
        let e = (dx * dx + dy * dy).sqrt();
        let cm = ((dx * w_cm).powi(2) + (dy * h_cm).powi(2)).sqrt();
        n += 1;
        sum += e;
        all.push(e);
        deg_sum += (2.0 * (cm / 80.0).atan()).to_degrees();
        cal_n += r["calibrated"].as_bool().unwrap() as usize;
    }
    all.sort_by(f64::total_cmp);
    let p95 = all[(0.95 * n as f64).ceil() as usize - 1];
    let median = if n % 2 == 1 { all[n / 2] } else { (all[n / 2 - 1] + all[n / 2]) / 2.0 };

    assert_eq!(report["samples"].as_u64(), Some(n as u64));
    assert_eq!(report["calibrated_samples"].as_u64(), Some(cal_n as u64));
    let e = &report["error"]["all"];
    assert!((e["mean"].as_f64().unwrap() - sum / n as f64).abs() < 1e-12);
    assert_eq!(e["p95"].as_f64(), Some(p95));
    assert_eq!(e["median"].as_f64(), Some(median));
    assert!((report["error_deg"]["all"]["mean"].as_f64().unwrap() - deg_sum / n as f64).abs() < 1e-9);
    for (k, v) in &sources {
        assert_eq!(report["transforms"][k].as_u64(), Some(*v), "{k}");
    }

    let selection = std::fs::read_to_string(dir.path().join("out.selection.csv")).unwrap();
    let rows: Vec<&str> = selection.lines().skip(1).collect();
    let accepted = rows.iter().filter(|l| l.ends_with(",true")).count();
    let cost = 30.0 * rows.len() as f64 / accepted as f64;
    assert!((report["frames_cost"].as_f64().unwrap() - cost).abs() < 1e-9);
}

#[test]
fn evaluating_against_another_corpus_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = simulate_and_run(dir.path(), &scenario("mixed.json"), &[]);
    let other = dir.path().join("other");
    ok(vgaze(&["simulate", &scenario("hard_cut.json"), s(&other)]));
    let res = vgaze(&["evaluate", s(&out), s(&other.join("truth.json"))]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("different corpora"));
}

#[test]
fn sweep_emits_a_four_cell_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    ok(vgaze(&["simulate", &scenario("mixed.json"), s(&corpus)]));
    let csv = dir.path().join("sweep.csv");
    let out = ok(vgaze(&["sweep", s(&corpus), "--out", s(&csv)]));
    let table = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "{table}");
    assert!(lines[1].starts_with("128") && lines[2].starts_with("170"));
    let cells: Vec<Vec<String>> = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(cells.len(), 4);
    for bin in ["128", "170"] {
        let lo: f64 = cells.iter().find(|c| c[0] == bin && c[1] == "0.6").unwrap()[2].parse().unwrap();
        let hi: f64 = cells.iter().find(|c| c[0] == bin && c[1] == "0.8").unwrap()[2].parse().unwrap();
        assert!(hi >= lo && lo >= 30.0, "bin {bin}: {lo} {hi}");
    }
}

#[test]
fn threads_and_shipped_history_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, single) = simulate_and_run(dir.path(), &scenario("building.json"), &["--history"]);
    let multi = dir.path().join("multi.jsonl");
    ok(vgaze(&["run", s(&corpus), "--out", s(&multi), "--history", "--threads", "3"]));
    assert_eq!(std::fs::read(&single).unwrap(), std::fs::read(&multi).unwrap());
    let plain = dir.path().join("plain.jsonl");
    ok(vgaze(&["run", s(&corpus), "--out", s(&plain)]));
    assert!(transform_sources(&single).len() > transform_sources(&plain).len());
}
