//! Continuous tracking: transform application, landscape compensation,
//! head-movement and scene-cut triggers, and the opportunistic
//! recalibration state machine that owns the calibration window.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::calibration::{
    merge_historical, CalibrationParams, CalibrationWindow, HistoricalTrajectories, RoughGazeSample, TransformSource,
    TransformVector, WindowOutcome,
};
use crate::error::{Error, Result};
use crate::frame::{downscale, Frame};
use crate::geom::Point;
use crate::heatmap::{extract_feature_vector, HeatmapSource, SaliencyHeatmap, Selection, SelectionParams};
use crate::saliency::{historical_heatmap, SaliencyDetector, SpectralResidual};
use crate::temporal::{hamming, phash, Attention, AttentionMode, CutScheduler, PerceptualHash};

/// Face-posture features at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub timestamp_ms: f64,
    pub pose: Vec<f64>,
    /// In-plane face rotation seen by the camera; drives landscape compensation.
    #[serde(default)]
    pub face_rotation_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Orientation {
    #[default]
    Portrait,
    LandscapeLeft,
    LandscapeRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeParams {
    /// Fractional x correction per degree of face rotation.
    pub kx: f64,
    pub y_floor: f64,
    pub cy: f64,
}

impl Default for LandscapeParams {
    fn default() -> Self {
        LandscapeParams {
            kx: 0.002,
            y_floor: 0.3,
            cy: 0.03,
        }
    }
}

/// Component-wise `rough + t`; identity when no transform exists. No clamping.
pub fn apply_transform(rough: Point, t: Option<&TransformVector>) -> Point {
    match t {
        Some(t) => rough + t.offset(),
        None => rough,
    }
}

/// Euclidean pose distance strictly above `threshold`.
pub fn head_movement_detect(prev: &HeadPose, cur: &HeadPose, threshold: f64) -> Result<bool> {
    if prev.pose.len() != cur.pose.len() {
        return Err(Error::InvalidInput(format!(
            "pose dimension changed from {} to {}",
            prev.pose.len(),
            cur.pose.len()
        )));
    }
    let d2: f64 = prev.pose.iter().zip(&cur.pose).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(d2.sqrt() > threshold)
}

/// Landscape distortion correction. The x correction scales with both the
/// face rotation and the distance from the origin along x; y gets a constant
/// lift below `y_floor`. Portrait is the identity.
pub fn landscape_compensate(gaze: Point, face_rotation_deg: f64, orientation: Orientation, params: &LandscapeParams) -> Point {
    let sign = match orientation {
        Orientation::Portrait => return gaze,
        Orientation::LandscapeLeft => 1.0,
        Orientation::LandscapeRight => -1.0,
    };
    let x = gaze.x - sign * params.kx * face_rotation_deg * gaze.x;
    let y = if gaze.y < params.y_floor { gaze.y + params.cy } else { gaze.y };
    Point::new(x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub working_width: usize,
    pub working_height: usize,
    pub selection: SelectionParams,
    pub calibration: CalibrationParams,
    pub window_n: usize,
    pub cut_window_n: usize,
    pub bottom_up_frames: u64,
    pub cut_hash_threshold: u32,
    pub head_move_threshold: f64,
    pub orientation: Orientation,
    pub landscape: LandscapeParams,
    /// When false only the initial calibration runs.
    pub recalibration: bool,
    /// Treat every frame as a key-frame candidate for cut detection.
    pub all_frames_key: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            working_width: 68,
            working_height: 68,
            selection: SelectionParams::default(),
            calibration: CalibrationParams::default(),
            window_n: 10,
            cut_window_n: 5,
            bottom_up_frames: 5,
            cut_hash_threshold: 10,
            head_move_threshold: 0.005,
            orientation: Orientation::Portrait,
            landscape: LandscapeParams::default(),
            recalibration: true,
            all_frames_key: false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Event {
    Frame {
        frame: Frame,
        /// Externally produced top-down map at working resolution.
        top_down: Option<SaliencyHeatmap>,
        /// Precomputed bottom-up map; computed on demand when absent.
        bottom_up: Option<SaliencyHeatmap>,
    },
    Gaze(RoughGazeSample),
    Pose(HeadPose),
}

impl Event {
    pub fn frame(frame: Frame) -> Self {
        Event::Frame {
            frame,
            top_down: None,
            bottom_up: None,
        }
    }

    pub fn timestamp_ms(&self) -> f64 {
        match self {
            Event::Frame { frame, .. } => frame.timestamp_ms,
            Event::Gaze(s) => s.timestamp_ms,
            Event::Pose(p) => p.timestamp_ms,
        }
    }

    /// Order among events sharing a timestamp: pose, then frame, then gaze.
    pub fn rank(&self) -> u8 {
        match self {
            Event::Pose(_) => 0,
            Event::Frame { .. } => 1,
            Event::Gaze(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedGaze {
    pub t_ms: f64,
    pub frame_index: u64,
    pub position: Point,
    pub calibrated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSelection {
    pub frame_index: u64,
    pub source: HeatmapSource,
    pub n: usize,
    pub scs: f64,
    pub accepted: bool,
    pub attention: Attention,
}

/// Observable state-machine transitions, for logs and scripted-trace tests.
#[derive(Debug, Clone, PartialEq)]
pub enum Note {
    HeadMove { t_ms: f64 },
    Cut { frame_index: u64, distance: u32 },
    CutSkipped { frame_index: u64 },
    WindowOpened {
        frame_index: u64,
        source: TransformSource,
        attention: Attention,
        target_len: usize,
        restarted: bool,
    },
    WindowAbandoned { frame_index: u64, source: TransformSource },
    UnknownFrame { frame_index: u64 },
    TopDownMissing { frame_index: u64 },
}

#[derive(Debug, Clone, Default)]
pub struct StepOutput {
    pub gazes: Vec<CalibratedGaze>,
    pub transform: Option<TransformVector>,
    pub selection: Option<FrameSelection>,
    pub notes: Vec<Note>,
}

/// Wall-clock time spent per pipeline component.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub downscale: Duration,
    pub bottom_up: Duration,
    pub top_down: Duration,
    pub selection: Duration,
    pub scene_cut: Duration,
    pub calibration: Duration,
    pub compensation: Duration,
    pub frames: u64,
    pub gazes: u64,
}

impl Timings {
    pub fn merge(&mut self, o: &Timings) {
        self.downscale += o.downscale;
        self.bottom_up += o.bottom_up;
        self.top_down += o.top_down;
        self.selection += o.selection;
        self.scene_cut += o.scene_cut;
        self.calibration += o.calibration;
        self.compensation += o.compensation;
        self.frames += o.frames;
        self.gazes += o.gazes;
    }

    /// `(component, total, per-item mean in ms)` rows.
    pub fn rows(&self) -> Vec<(&'static str, Duration, f64)> {
        let per = |d: Duration, n: u64| if n == 0 { 0.0 } else { d.as_secs_f64() * 1e3 / n as f64 };
        vec![
            ("downscale", self.downscale, per(self.downscale, self.frames)),
            ("saliency_bottom_up", self.bottom_up, per(self.bottom_up, self.frames)),
            ("saliency_top_down", self.top_down, per(self.top_down, self.frames)),
            ("saliency_selection", self.selection, per(self.selection, self.frames)),
            ("scene_cut", self.scene_cut, per(self.scene_cut, self.frames)),
            ("calibration", self.calibration, per(self.calibration, self.frames)),
            ("compensation", self.compensation, per(self.compensation, self.gazes)),
        ]
    }
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

/// The live tracker. Single writer: events must arrive in non-decreasing time.
pub struct Session {
    config: SessionConfig,
    detector: Box<dyn SaliencyDetector>,
    history: Option<HistoricalTrajectories>,
    transform: Option<TransformVector>,
    scheduler: CutScheduler,
    window: Option<CalibrationWindow>,
    last_pose: Option<HeadPose>,
    face_rotation_deg: f64,
    pending_head_move: bool,
    skip_next_cut: bool,
    prev_frame: Option<(Frame, Option<PerceptualHash>)>,
    seen_frames: HashSet<u64>,
    last_t: f64,
    timings: Timings,
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        let detector = Box::new(SpectralResidual::new(config.working_width, config.working_height));
        Self::with_detector(config, detector)
    }

    pub fn with_detector(config: SessionConfig, detector: Box<dyn SaliencyDetector>) -> Self {
        let scheduler = CutScheduler::new(config.bottom_up_frames);
        Session {
            config,
            detector,
            history: None,
            transform: None,
            scheduler,
            window: None,
            last_pose: None,
            face_rotation_deg: 0.0,
            pending_head_move: false,
            skip_next_cut: false,
            prev_frame: None,
            seen_frames: HashSet::new(),
            last_t: f64::NEG_INFINITY,
            timings: Timings::default(),
        }
    }

    /// Enables history-assisted selection.
    pub fn with_history(mut self, history: HistoricalTrajectories) -> Self {
        self.history = Some(history);
        self
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn current_transform(&self) -> Option<&TransformVector> {
        self.transform.as_ref()
    }

    pub fn open_window(&self) -> Option<&CalibrationWindow> {
        self.window.as_ref()
    }

    pub fn attention(&self) -> AttentionMode {
        self.scheduler.mode()
    }

    pub fn timings(&self) -> &Timings {
        &self.timings
    }

    pub fn step(&mut self, event: Event) -> Result<StepOutput> {
        let t = event.timestamp_ms();
        if !t.is_finite() || t < self.last_t {
            return Err(Error::Protocol(format!(
                "event at t={t} ms arrived after t={} ms",
                self.last_t
            )));
        }
        self.last_t = t;
        let mut out = StepOutput::default();
        match event {
            Event::Pose(pose) => self.on_pose(pose, &mut out)?,
            Event::Frame {
                frame,
                top_down,
                bottom_up,
            } => self.on_frame(frame, top_down, bottom_up, &mut out)?,
            Event::Gaze(sample) => self.on_gaze(sample, &mut out),
        }
        Ok(out)
    }

    /// Flushes the open window at end of stream.
    pub fn finish(&mut self) -> StepOutput {
        let mut out = StepOutput::default();
        let now = self.last_t.max(0.0);
        self.check_window(now, u64::MAX, &mut out);
        out
    }

    fn on_pose(&mut self, pose: HeadPose, out: &mut StepOutput) -> Result<()> {
        if let Some(prev) = &self.last_pose {
            if head_movement_detect(prev, &pose, self.config.head_move_threshold)? {
                out.notes.push(Note::HeadMove { t_ms: pose.timestamp_ms });
                if self.config.recalibration {
                    self.pending_head_move = true;
                }
            }
        }
        self.face_rotation_deg = pose.face_rotation_deg;
        self.last_pose = Some(pose);
        Ok(())
    }

    fn check_window(&mut self, now: f64, frame_index: u64, out: &mut StepOutput) {
        let Some(window) = self.window.as_mut() else { return };
        let params = self.config.calibration;
        let outcome = timed(&mut self.timings.calibration, || window.try_complete(&params, now));
        match outcome {
            WindowOutcome::Solved(t) => {
                self.transform = Some(t);
                out.transform = Some(t);
                self.window = None;
            }
            WindowOutcome::CapExceeded => {
                let source = window.source;
                let target = window.target_len;
                out.notes.push(Note::WindowAbandoned { frame_index, source });
                self.window = None;
                // scene-cut windows are tied to their bottom-up burst; others retry
                if source != TransformSource::SceneCut && frame_index != u64::MAX {
                    self.open(source, self.scheduler.mode().mode, target, now, frame_index, true, out);
                }
            }
            WindowOutcome::Collecting | WindowOutcome::Deferred => {}
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn open(
        &mut self,
        source: TransformSource,
        attention: Attention,
        target_len: usize,
        now: f64,
        frame_index: u64,
        restarted: bool,
        out: &mut StepOutput,
    ) {
        out.notes.push(Note::WindowOpened {
            frame_index,
            source,
            attention,
            target_len,
            restarted,
        });
        self.window = Some(CalibrationWindow::new(source, attention, target_len, now));
    }

    fn on_frame(
        &mut self,
        frame: Frame,
        top_down: Option<SaliencyHeatmap>,
        bottom_up: Option<SaliencyHeatmap>,
        out: &mut StepOutput,
    ) -> Result<()> {
        let now = frame.timestamp_ms;
        let index = frame.index;
        self.timings.frames += 1;

        // every sample of earlier frames is in by now
        self.check_window(now, index, out);

        // the skip flag lives only as long as the bottom-up burst it was set in
        if self.scheduler.mode().mode == Attention::TopDown {
            self.skip_next_cut = false;
        }

        let mut cut = false;
        let mut this_hash = None;
        if frame.is_key_frame || self.config.all_frames_key {
            if let Some((prev, prev_hash)) = self.prev_frame.as_ref() {
                let threshold = self.config.cut_hash_threshold;
                let distance = timed(&mut self.timings.scene_cut, || {
                    let a = prev_hash.unwrap_or_else(|| phash(prev));
                    let b = phash(&frame);
                    this_hash = Some(b);
                    hamming(a, b)
                });
                if distance > threshold {
                    cut = true;
                    self.scheduler.cut();
                    out.notes.push(Note::Cut {
                        frame_index: index,
                        distance,
                    });
                }
            }
        }
        let mode = self.scheduler.mode();

        if self.pending_head_move {
            self.pending_head_move = false;
            let restarted = self.window.is_some();
            if mode.mode == Attention::BottomUp {
                self.skip_next_cut = true;
            }
            self.open(TransformSource::HeadMove, mode.mode, self.config.window_n, now, index, restarted, out);
        }
        if cut && self.config.recalibration {
            if self.skip_next_cut {
                self.skip_next_cut = false;
                out.notes.push(Note::CutSkipped { frame_index: index });
            } else {
                let restarted = self.window.is_some();
                self.open(
                    TransformSource::SceneCut,
                    Attention::BottomUp,
                    self.config.cut_window_n,
                    now,
                    index,
                    restarted,
                    out,
                );
            }
        }
        if self.window.is_none() && self.transform.is_none() {
            self.open(TransformSource::Initial, mode.mode, self.config.window_n, now, index, false, out);
        }

        let attention = self.window.as_ref().map_or(mode.mode, |w| w.attention);
        let selection = self.select(&frame, attention, top_down, bottom_up, out)?;
        out.selection = Some(FrameSelection {
            frame_index: index,
            source: selection.1,
            n: selection.0.region_count(),
            scs: selection.0.scs(),
            accepted: selection.0.is_accepted(),
            attention,
        });
        if let Some(w) = self.window.as_mut() {
            w.consume_frame(selection.0.into_vector());
        }

        self.scheduler.advance();
        self.seen_frames.insert(index);
        self.prev_frame = Some((frame, this_hash));
        Ok(())
    }

    fn select(
        &mut self,
        frame: &Frame,
        attention: Attention,
        top_down: Option<SaliencyHeatmap>,
        bottom_up: Option<SaliencyHeatmap>,
        out: &mut StepOutput,
    ) -> Result<(Selection, HeatmapSource)> {
        let (w, h) = (self.config.working_width, self.config.working_height);
        let check = |hm: &SaliencyHeatmap| -> Result<()> {
            if (hm.width, hm.height) != (w, h) {
                return Err(Error::InvalidInput(format!(
                    "frame {}: heatmap is {}x{}, working resolution is {w}x{h}",
                    frame.index, hm.width, hm.height
                )));
            }
            Ok(())
        };

        let heatmap = match (attention, top_down) {
            (Attention::TopDown, Some(td)) => {
                timed(&mut self.timings.top_down, || check(&td))?;
                td
            }
            (attention, _) => {
                if attention == Attention::TopDown {
                    out.notes.push(Note::TopDownMissing { frame_index: frame.index });
                }
                match bottom_up {
                    Some(bu) => {
                        check(&bu)?;
                        bu
                    }
                    None => {
                        let small = timed(&mut self.timings.downscale, || downscale(frame, w, h))?;
                        let detector = &self.detector;
                        timed(&mut self.timings.bottom_up, || detector.detect(&small))
                    }
                }
            }
        };

        let params = self.config.selection;
        let history = self.history.as_ref();
        let index = frame.index;
        let selection = timed(&mut self.timings.selection, || {
            let primary = extract_feature_vector(&heatmap, params, index);
            let Some(hist) = history else {
                return (primary, heatmap.source);
            };
            match primary {
                Selection::Accepted(v) => (Selection::Accepted(merge_historical(v, hist)), heatmap.source),
                rejected => {
                    let points = hist.points(index);
                    if points.is_empty() {
                        return (rejected, heatmap.source);
                    }
                    match extract_feature_vector(&historical_heatmap(points, w, h), params, index) {
                        Selection::Accepted(v) => (Selection::Accepted(merge_historical(v, hist)), HeatmapSource::Historical),
                        _ => (rejected, heatmap.source),
                    }
                }
            }
        });
        Ok(selection)
    }

    fn on_gaze(&mut self, sample: RoughGazeSample, out: &mut StepOutput) {
        self.timings.gazes += 1;
        let orientation = self.config.orientation;
        let landscape = self.config.landscape;
        let rotation = self.face_rotation_deg;
        let transform = self.transform;
        let (compensated, emitted) = timed(&mut self.timings.compensation, || {
            let c = landscape_compensate(sample.position, rotation, orientation, &landscape);
            (c, apply_transform(c, transform.as_ref()))
        });
        out.gazes.push(CalibratedGaze {
            t_ms: sample.timestamp_ms,
            frame_index: sample.frame_index,
            position: emitted,
            calibrated: transform.is_some(),
        });
        if !self.seen_frames.contains(&sample.frame_index) {
            out.notes.push(Note::UnknownFrame {
                frame_index: sample.frame_index,
            });
            return;
        }
        if let Some(w) = self.window.as_mut() {
            w.push_sample(RoughGazeSample {
                position: compensated,
                ..sample
            });
        }
    }
}
