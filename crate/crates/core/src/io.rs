//! On-disk formats: corpus manifest, frame and heatmap rasters, gaze and
//! pose traces, ground truth, the JSON-lines output stream and the
//! per-frame selection log.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{HistoricalTrajectories, RoughGazeSample, TransformSource, TransformVector};
use crate::error::{Error, Result};
use crate::frame::{frame_file_name, read_pgm, top_down_file_name, write_pgm, Frame};
use crate::geom::Point;
use crate::heatmap::{HeatmapSource, SaliencyHeatmap};
use crate::pipeline::Corpus;
use crate::session::{CalibratedGaze, FrameSelection, HeadPose};
use crate::sim::{GroundTruth, RoughTrace, Scenario};
use crate::temporal::Attention;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const GAZE_FILE: &str = "gaze.csv";
pub const POSE_FILE: &str = "pose.csv";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub index: u64,
    pub t_ms: f64,
    pub file: String,
    pub key_frame: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_down: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<ManifestFrame>,
    pub gaze: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<String>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::format(path, format!("at `{field}`: {}", e.into_inner()))
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct GazeRow {
    t_ms: f64,
    frame_index: u64,
    x: f64,
    y: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Gaze trace CSV `t_ms,frame_index,x,y`.
pub fn read_gaze_csv(path: &Path) -> Result<Vec<RoughGazeSample>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<GazeRow>().enumerate() {
        let row = row.map_err(|e| Error::format(path, format!("row {}: {e}", i + 2)))?;
        let position = Point::new(row.x, row.y);
        if !row.t_ms.is_finite() || !position.is_finite() {
            return Err(Error::format(path, format!("row {}: non-finite value", i + 2)));
        }
        out.push(RoughGazeSample {
            timestamp_ms: row.t_ms,
            frame_index: row.frame_index,
            position,
        });
    }
    Ok(out)
}

pub fn write_gaze_csv(path: &Path, samples: &[RoughGazeSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for s in samples {
        w.serialize(GazeRow {
            t_ms: s.timestamp_ms,
            frame_index: s.frame_index,
            x: s.position.x,
            y: s.position.y,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pose CSV `t_ms,p0,…,p{d-1}[,rotation_deg]`.
pub fn read_pose_csv(path: &Path) -> Result<Vec<HeadPose>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0) != Some("t_ms") {
        return Err(Error::format(path, "first column must be t_ms"));
    }
    let mut pose_cols = Vec::new();
    let mut rotation_col = None;
    for (i, h) in headers.iter().enumerate().skip(1) {
        match h {
            "rotation_deg" => rotation_col = Some(i),
            h if h.starts_with('p') && h[1..].parse::<usize>() == Ok(pose_cols.len()) => pose_cols.push(i),
            other => return Err(Error::format(path, format!("unexpected column {other:?}"))),
        }
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| -> Result<f64> {
            let v: f64 = rec
                .get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::format(path, format!("row {}: column {}: {e}", line + 2, i + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::format(path, format!("row {}: non-finite value", line + 2)))
            }
        };
        out.push(HeadPose {
            timestamp_ms: num(0)?,
            pose: pose_cols.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            face_rotation_deg: rotation_col.map(num).transpose()?.unwrap_or(0.0),
        });
    }
    Ok(out)
}

pub fn write_pose_csv(path: &Path, poses: &[HeadPose]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let dim = poses.first().map_or(0, |p| p.pose.len());
    let mut header = vec!["t_ms".to_string()];
    header.extend((0..dim).map(|i| format!("p{i}")));
    header.push("rotation_deg".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for p in poses {
        if p.pose.len() != dim {
            return Err(Error::InvalidInput("pose dimension changed within the stream".into()));
        }
        let mut rec = vec![p.timestamp_ms.to_string()];
        rec.extend(p.pose.iter().map(|v| v.to_string()));
        rec.push(p.face_rotation_deg.to_string());
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One line of the output stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputRecord {
    Gaze {
        t_ms: f64,
        frame: u64,
        x: f64,
        y: f64,
        calibrated: bool,
    },
    Transform {
        t_ms: f64,
        vc: [f64; 2],
        source: TransformSource,
    },
}

impl From<&CalibratedGaze> for OutputRecord {
    fn from(g: &CalibratedGaze) -> Self {
        OutputRecord::Gaze {
            t_ms: g.t_ms,
            frame: g.frame_index,
            x: g.position.x,
            y: g.position.y,
            calibrated: g.calibrated,
        }
    }
}

impl From<&TransformVector> for OutputRecord {
    fn from(t: &TransformVector) -> Self {
        OutputRecord::Transform {
            t_ms: t.computed_at_ms,
            vc: [t.dx, t.dy],
            source: t.source,
        }
    }
}

pub fn write_jsonl(path: &Path, records: &[OutputRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<OutputRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionRow {
    frame_index: u64,
    source: HeatmapSource,
    attention: Attention,
    n: usize,
    scs: f64,
    accepted: bool,
}

pub fn write_selection_csv(path: &Path, rows: &[FrameSelection]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(SelectionRow {
            frame_index: r.frame_index,
            source: r.source,
            attention: r.attention,
            n: r.n,
            scs: r.scs,
            accepted: r.accepted,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_selection_csv(path: &Path) -> Result<Vec<FrameSelection>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize::<SelectionRow>()
        .enumerate()
        .map(|(i, row)| {
            let r = row.map_err(|e| Error::format(path, format!("row {}: {e}", i + 2)))?;
            Ok(FrameSelection {
                frame_index: r.frame_index,
                source: r.source,
                n: r.n,
                scs: r.scs,
                accepted: r.accepted,
                attention: r.attention,
            })
        })
        .collect()
}

/// Sidecar path for the selection log of an output stream: `out.jsonl` → `out.selection.csv`.
pub fn selection_path(output: &Path) -> PathBuf {
    output.with_extension("selection.csv")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Materializes a simulated corpus: frame and top-down rasters, manifest,
/// truth, gaze and pose traces, and other viewers' gaze when present.
pub fn write_scenario(dir: &Path, scenario: &Scenario, trace: &RoughTrace) -> Result<Manifest> {
    create_dir(dir)?;
    let mut frames = Vec::with_capacity(scenario.frames.len());
    for (f, td) in scenario.frames.iter().zip(&scenario.top_down) {
        let file = frame_file_name(f.index);
        write_pgm(&dir.join(&file), f.width, f.height, &f.pixels)?;
        let td_file = top_down_file_name(f.index);
        write_pgm(&dir.join(&td_file), td.width, td.height, &td.values)?;
        frames.push(ManifestFrame {
            index: f.index,
            t_ms: f.timestamp_ms,
            file,
            key_frame: f.is_key_frame,
            top_down: Some(td_file),
        });
    }
    write_gaze_csv(&dir.join(GAZE_FILE), &trace.samples)?;
    write_pose_csv(&dir.join(POSE_FILE), &trace.poses)?;
    let history = if scenario.history.is_empty() {
        None
    } else {
        HistoricalTrajectories::write_csv(&scenario.history, &dir.join(HISTORY_FILE))?;
        Some(HISTORY_FILE.to_string())
    };
    write_json(&dir.join(TRUTH_FILE), &scenario.truth)?;
    let manifest = Manifest {
        fps: scenario.config.fps,
        width: scenario.config.width,
        height: scenario.config.height,
        frames,
        gaze: GAZE_FILE.into(),
        pose: Some(POSE_FILE.into()),
        history,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    read_json(path)
}

/// Loads a corpus directory described by its manifest.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&manifest_path)?;
    let mut frames = Vec::with_capacity(manifest.frames.len());
    let mut top_down = Vec::with_capacity(manifest.frames.len());
    for mf in &manifest.frames {
        let path = dir.join(&mf.file);
        let img = read_pgm(&path)?;
        if (img.width, img.height) != (manifest.width, manifest.height) {
            return Err(Error::format(
                &path,
                format!(
                    "frame is {}x{}, manifest says {}x{}",
                    img.width, img.height, manifest.width, manifest.height
                ),
            ));
        }
        frames.push(Frame::new(mf.index, mf.t_ms, img.width, img.height, img.pixels)?.with_key_frame(mf.key_frame));
        top_down.push(match &mf.top_down {
            Some(file) => {
                let td = read_pgm(&dir.join(file))?;
                Some(SaliencyHeatmap::from_values(
                    td.width,
                    td.height,
                    td.pixels,
                    HeatmapSource::TopDownExternal,
                )?)
            }
            None => None,
        });
    }
    let gaze = read_gaze_csv(&dir.join(&manifest.gaze))?;
    let poses = match &manifest.pose {
        Some(file) => read_pose_csv(&dir.join(file))?,
        None => Vec::new(),
    };
    let history = manifest.history.as_ref().map(|file| dir.join(file));
    Ok(Corpus {
        fps: manifest.fps,
        frames,
        top_down,
        gaze,
        poses,
        history,
    })
}
