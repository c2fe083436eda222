//! Window-level calibration: blink-outlier rejection, per-frame gaze
//! averaging, radius-graph clustering of saliency points and gaze points,
//! and the centroid offset that becomes the transform vector.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::heatmap::FeatureVector;
use crate::temporal::Attention;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughGazeSample {
    pub timestamp_ms: f64,
    pub frame_index: u64,
    pub position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameAveragedGaze {
    pub frame_index: u64,
    pub position: Point,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformSource {
    SceneCut,
    HeadMove,
    Initial,
}

impl TransformSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformSource::SceneCut => "SceneCut",
            TransformSource::HeadMove => "HeadMove",
            TransformSource::Initial => "Initial",
        }
    }
}

/// Screen-space correction added to rough gaze.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformVector {
    pub dx: f64,
    pub dy: f64,
    pub computed_at_ms: f64,
    pub source: TransformSource,
}

impl TransformVector {
    pub fn offset(&self) -> Point {
        Point::new(self.dx, self.dy)
    }
}

fn axis_stats(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Drops samples whose |z| exceeds `alpha` on either axis. Population σ; an
/// axis with σ = 0 flags nothing.
pub fn zscore_filter(samples: &[RoughGazeSample], alpha: f64) -> Vec<RoughGazeSample> {
    if samples.is_empty() {
        return Vec::new();
    }
    let (mx, sx) = axis_stats(samples.iter().map(|s| s.position.x));
    let (my, sy) = axis_stats(samples.iter().map(|s| s.position.y));
    // sums of identical values can leave sub-ulp spread; treat that as zero
    let flat = |mean: f64, sigma: f64| sigma <= 1e-12 * mean.abs().max(1.0);
    let outlier = |v: f64, mean: f64, sigma: f64| !flat(mean, sigma) && ((v - mean) / sigma).abs() > alpha;
    samples
        .iter()
        .filter(|s| !outlier(s.position.x, mx, sx) && !outlier(s.position.y, my, sy))
        .copied()
        .collect()
}

/// One mean per distinct frame, in frame order.
pub fn average_per_frame(samples: &[RoughGazeSample]) -> Vec<FrameAveragedGaze> {
    let mut groups: BTreeMap<u64, Vec<Point>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.frame_index).or_default().push(s.position);
    }
    groups
        .into_iter()
        .map(|(frame_index, pts)| FrameAveragedGaze {
            frame_index,
            sample_count: pts.len(),
            position: Point::mean(pts).expect("group is non-empty"),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the input, ascending.
    pub members: Vec<usize>,
    pub centroid: Point,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Connected components of the graph linking points at distance ≤ `epsilon`,
/// keeping components with at least `min_size` members. Sorted by size
/// descending, then by smallest member index.
pub fn cluster_points(points: &[Point], epsilon: f64, min_size: usize) -> Vec<Cluster> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let cell = |p: Point| ((p.x / epsilon).floor() as i64, (p.y / epsilon).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }

    let mut seen = vec![false; points.len()];
    let mut clusters = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..points.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (cx, cy) = cell(points[i]);
            for gx in cx - 1..=cx + 1 {
                for gy in cy - 1..=cy + 1 {
                    let Some(bucket) = grid.get(&(gx, gy)) else { continue };
                    for &j in bucket {
                        if !seen[j] && points[i].dist(points[j]) <= epsilon {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        if members.len() >= min_size.max(1) {
            members.sort_unstable();
            let centroid = Point::mean(members.iter().map(|&m| points[m])).expect("non-empty");
            clusters.push(Cluster { members, centroid });
        }
    }
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a.members[0].cmp(&b.members[0])));
    clusters
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub epsilon: f64,
    pub min_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformOutcome {
    Solved {
        vc: Point,
        saliency_centroid: Point,
        gaze_centroid: Point,
    },
    /// One side produced no admissible cluster.
    Deferred,
}

/// Saliency centroid minus gaze centroid, each taken from its dominant cluster.
pub fn compute_transform(vectors: &[FeatureVector], gazes: &[FrameAveragedGaze], params: ClusterParams) -> TransformOutcome {
    let saliency: Vec<Point> = vectors.iter().flat_map(|v| v.saliency_points()).collect();
    let gaze: Vec<Point> = gazes.iter().map(|g| g.position).collect();
    let top_s = cluster_points(&saliency, params.epsilon, params.min_size).into_iter().next();
    let top_g = cluster_points(&gaze, params.epsilon, params.min_size).into_iter().next();
    match (top_s, top_g) {
        (Some(s), Some(g)) => TransformOutcome::Solved {
            vc: s.centroid - g.centroid,
            saliency_centroid: s.centroid,
            gaze_centroid: g.centroid,
        },
        _ => TransformOutcome::Deferred,
    }
}

/// Past viewers' gaze points per frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoricalTrajectories {
    per_frame: BTreeMap<u64, Vec<Point>>,
    users: BTreeSet<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct HistoryRow {
    user_id: u64,
    frame_index: u64,
    x: f64,
    y: f64,
}

impl HistoricalTrajectories {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, user_id: u64, frame_index: u64, point: Point) -> Result<()> {
        if !point.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite historical point for user {user_id}, frame {frame_index}"
            )));
        }
        self.users.insert(user_id);
        self.per_frame.entry(frame_index).or_default().push(point);
        Ok(())
    }

    pub fn points(&self, frame_index: u64) -> &[Point] {
        self.per_frame.get(&frame_index).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_frame.is_empty()
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        let headers = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["user_id", "frame_index", "x", "y"] {
            return Err(Error::format(path, format!("expected header user_id,frame_index,x,y, got {:?}", headers)));
        }
        let mut out = Self::new();
        for (line, row) in rdr.deserialize::<HistoryRow>().enumerate() {
            let row = row.map_err(|e| Error::format(path, format!("row {}: {e}", line + 2)))?;
            out.insert(row.user_id, row.frame_index, Point::new(row.x, row.y))
                .map_err(|e| Error::format(path, format!("row {}: {e}", line + 2)))?;
        }
        Ok(out)
    }

    /// Writes `(user_id, frame_index, point)` rows.
    pub fn write_csv(rows: &[(u64, u64, Point)], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        for &(user_id, frame_index, p) in rows {
            w.serialize(HistoryRow {
                user_id,
                frame_index,
                x: p.x,
                y: p.y,
            })
            .map_err(|e| Error::format(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Appends the frame's historical points; they weigh the same as detected peaks.
pub fn merge_historical(vector: FeatureVector, hist: &HistoricalTrajectories) -> FeatureVector {
    let mut vector = vector;
    vector.historical_points.extend_from_slice(hist.points(vector.frame_index));
    vector
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    /// `None` disables blink rejection (ablation).
    pub zscore_alpha: Option<f64>,
    pub epsilon: f64,
    /// `None` means ⌈target_len / 3⌉.
    pub min_size: Option<usize>,
    pub cap_multiplier: usize,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            zscore_alpha: Some(3.0),
            epsilon: 0.1,
            min_size: None,
            cap_multiplier: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowOutcome {
    /// Fewer than `target_len` usable frames so far.
    Collecting,
    Solved(TransformVector),
    /// Full, but clustering found no admissible cluster; keep collecting.
    Deferred,
    /// Consumed `cap_multiplier × target_len` frames without a solution.
    CapExceeded,
}

/// A batch of accepted frames and their gaze samples, consumed by one calibration attempt.
#[derive(Debug, Clone)]
pub struct CalibrationWindow {
    pub source: TransformSource,
    /// Saliency type used for every frame of this window, fixed at open.
    pub attention: Attention,
    pub target_len: usize,
    pub opened_at_ms: f64,
    pub vectors: Vec<FeatureVector>,
    pub samples: Vec<RoughGazeSample>,
    frames_consumed: usize,
    accepted: BTreeSet<u64>,
}

impl CalibrationWindow {
    pub fn new(source: TransformSource, attention: Attention, target_len: usize, opened_at_ms: f64) -> Self {
        CalibrationWindow {
            source,
            attention,
            target_len,
            opened_at_ms,
            vectors: Vec::new(),
            samples: Vec::new(),
            frames_consumed: 0,
            accepted: BTreeSet::new(),
        }
    }

    pub fn frames_consumed(&self) -> usize {
        self.frames_consumed
    }

    /// Registers a frame that arrived while the window was open, with its vector if accepted.
    pub fn consume_frame(&mut self, vector: Option<FeatureVector>) {
        self.frames_consumed += 1;
        if let Some(v) = vector {
            self.accepted.insert(v.frame_index);
            self.vectors.push(v);
        }
    }

    /// Keeps the sample only if its frame is part of the window.
    pub fn push_sample(&mut self, sample: RoughGazeSample) -> bool {
        if self.accepted.contains(&sample.frame_index) {
            self.samples.push(sample);
            true
        } else {
            false
        }
    }

    pub fn min_cluster_size(&self, params: &CalibrationParams) -> usize {
        params.min_size.unwrap_or(self.target_len.div_ceil(3)).max(1)
    }

    /// Attempts calibration once every accepted frame's samples have arrived.
    pub fn try_complete(&mut self, params: &CalibrationParams, now_ms: f64) -> WindowOutcome {
        let cap = params.cap_multiplier.max(1) * self.target_len;
        if self.vectors.len() >= self.target_len {
            let filtered = match params.zscore_alpha {
                Some(alpha) => zscore_filter(&self.samples, alpha),
                None => self.samples.clone(),
            };
            let gazes = average_per_frame(&filtered);
            let usable: BTreeSet<u64> = gazes.iter().map(|g| g.frame_index).collect();
            if usable.len() < self.vectors.len() {
                // frames left without samples are dropped and the window refills
                self.vectors.retain(|v| usable.contains(&v.frame_index));
                self.samples.retain(|s| usable.contains(&s.frame_index));
                self.accepted.retain(|f| usable.contains(f));
            }
            if self.vectors.len() >= self.target_len {
                let cluster = ClusterParams {
                    epsilon: params.epsilon,
                    min_size: self.min_cluster_size(params),
                };
                match compute_transform(&self.vectors, &gazes, cluster) {
                    TransformOutcome::Solved { vc, .. } => {
                        return WindowOutcome::Solved(TransformVector {
                            dx: vc.x,
                            dy: vc.y,
                            computed_at_ms: now_ms,
                            source: self.source,
                        })
                    }
                    TransformOutcome::Deferred if self.frames_consumed < cap => return WindowOutcome::Deferred,
                    TransformOutcome::Deferred => return WindowOutcome::CapExceeded,
                }
            }
        }
        if self.frames_consumed >= cap {
            WindowOutcome::CapExceeded
        } else {
            WindowOutcome::Collecting
        }
    }
}
