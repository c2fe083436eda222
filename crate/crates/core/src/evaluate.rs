//! Accuracy report of an output stream against simulator ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::io::OutputRecord;
use crate::pipeline::frames_cost;
use crate::session::FrameSelection;
use crate::sim::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    /// Physical diagonal; enables centimetre and degree figures.
    pub screen_diag_cm: Option<f64>,
    /// Width and height proportions of the screen.
    pub aspect: (f64, f64),
    pub view_dist_cm: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            screen_diag_cm: None,
            aspect: (9.0, 19.5),
            view_dist_cm: 30.0,
        }
    }
}

impl EvalParams {
    /// Screen width and height in centimetres.
    pub fn screen_cm(&self) -> Option<(f64, f64)> {
        let diag = self.screen_diag_cm?;
        let (aw, ah) = self.aspect;
        let norm = (aw * aw + ah * ah).sqrt();
        Some((diag * aw / norm, diag * ah / norm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl ErrorStats {
    /// Nearest-rank 95th percentile; median averages the two middle values for even counts.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(ErrorStats {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95: v[rank - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitStats {
    pub all: Option<ErrorStats>,
    pub calibrated: Option<ErrorStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub samples: usize,
    pub calibrated_samples: usize,
    pub first_transform_ms: Option<f64>,
    pub transforms: BTreeMap<String, usize>,
    pub error: UnitStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_cm: Option<UnitStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_deg: Option<UnitStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames_cost: Option<f64>,
}

/// Per-sample error, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub t_ms: f64,
    pub frame: u64,
    pub error: f64,
    pub calibrated: bool,
}

fn stats(points: &[ErrorPoint], f: impl Fn(f64) -> f64) -> UnitStats {
    let all: Vec<f64> = points.iter().map(|p| f(p.error)).collect();
    let cal: Vec<f64> = points.iter().filter(|p| p.calibrated).map(|p| f(p.error)).collect();
    UnitStats {
        all: ErrorStats::from_values(&all),
        calibrated: ErrorStats::from_values(&cal),
    }
}

/// `|emitted − truth(frame)|` for every gaze record.
pub fn error_series(records: &[OutputRecord], truth: &GroundTruth) -> Result<Vec<ErrorPoint>> {
    records
        .iter()
        .filter_map(|r| match r {
            OutputRecord::Gaze {
                t_ms,
                frame,
                x,
                y,
                calibrated,
            } => Some((*t_ms, *frame, Point::new(*x, *y), *calibrated)),
            OutputRecord::Transform { .. } => None,
        })
        .map(|(t_ms, frame, p, calibrated)| {
            let tf = truth.frame(frame).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "gaze record for frame {frame} has no ground truth ({} frames); output and truth come from different corpora",
                    truth.frames.len()
                ))
            })?;
            Ok(ErrorPoint {
                t_ms,
                frame,
                error: p.dist(tf.gaze),
                calibrated,
            })
        })
        .collect()
}

pub fn evaluate(
    records: &[OutputRecord],
    truth: &GroundTruth,
    selections: Option<&[FrameSelection]>,
    params: &EvalParams,
) -> Result<(Report, Vec<ErrorPoint>)> {
    let series = error_series(records, truth)?;
    let mut transforms = BTreeMap::new();
    let mut first_transform_ms = None;
    for r in records {
        if let OutputRecord::Transform { t_ms, source, .. } = r {
            *transforms.entry(source.as_str().to_string()).or_insert(0) += 1;
            first_transform_ms.get_or_insert(*t_ms);
        }
    }
    // centimetres need the per-axis components, so recompute from records
    let (error_cm, error_deg) = match params.screen_cm() {
        Some((w_cm, h_cm)) => {
            let mut cm_points = Vec::with_capacity(series.len());
            for r in records {
                if let OutputRecord::Gaze {
                    t_ms,
                    frame,
                    x,
                    y,
                    calibrated,
                } = r
                {
                    let g = truth.frame(*frame).expect("checked by error_series").gaze;
                    let (dx, dy) = ((x - g.x) * w_cm, (y - g.y) * h_cm);
                    cm_points.push(ErrorPoint {
                        t_ms: *t_ms,
                        frame: *frame,
                        error: (dx * dx + dy * dy).sqrt(),
                        calibrated: *calibrated,
                    });
                }
            }
            let dist = params.view_dist_cm;
            (
                Some(stats(&cm_points, |e| e)),
                Some(stats(&cm_points, |e| (2.0 * (e / (2.0 * dist)).atan()).to_degrees())),
            )
        }
        None => (None, None),
    };
    let report = Report {
        samples: series.len(),
        calibrated_samples: series.iter().filter(|p| p.calibrated).count(),
        first_transform_ms,
        transforms,
        error: stats(&series, |e| e),
        error_cm,
        error_deg,
        frames_cost: selections.and_then(|s| frames_cost(s, 30)),
    };
    Ok((report, series))
}

pub fn write_error_series_csv(path: &std::path::Path, series: &[ErrorPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for p in series {
        w.serialize(p).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
