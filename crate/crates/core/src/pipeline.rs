//! End-to-end run: merge the corpus streams into one ordered event stream,
//! optionally precompute bottom-up maps on a worker pool, and drive a
//! session over it.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::calibration::{HistoricalTrajectories, RoughGazeSample, TransformVector};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::frame::{downscale, Frame};
use crate::heatmap::SaliencyHeatmap;
use crate::io::OutputRecord;
use crate::saliency::{SaliencyDetector, SpectralResidual};
use crate::session::{Event, FrameSelection, HeadPose, Note, Session, SessionConfig, Timings};
use crate::sim::{RoughTrace, Scenario};

/// Frames plus the gaze and pose streams recorded alongside them.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub fps: f64,
    pub frames: Vec<Frame>,
    /// Externally produced top-down maps, parallel to `frames`.
    pub top_down: Vec<Option<SaliencyHeatmap>>,
    pub gaze: Vec<RoughGazeSample>,
    pub poses: Vec<HeadPose>,
    /// Other viewers' gaze shipped with the corpus, if any.
    pub history: Option<PathBuf>,
}

impl Corpus {
    pub fn from_scenario(scenario: &Scenario, trace: &RoughTrace) -> Self {
        Corpus {
            fps: scenario.config.fps,
            frames: scenario.frames.clone(),
            top_down: scenario.top_down.iter().cloned().map(Some).collect(),
            gaze: trace.samples.clone(),
            poses: trace.poses.clone(),
            history: None,
        }
    }
}

/// Orders all events by timestamp; ties go pose, frame, gaze, then input order.
pub fn merge_events(corpus: &Corpus, bottom_up: Option<Vec<SaliencyHeatmap>>) -> Result<Vec<Event>> {
    let mut bottom_up = bottom_up.map(|v| v.into_iter().map(Some).collect::<Vec<_>>());
    let mut events = Vec::with_capacity(corpus.frames.len() + corpus.gaze.len() + corpus.poses.len());
    for (i, f) in corpus.frames.iter().enumerate() {
        events.push(Event::Frame {
            frame: f.clone(),
            top_down: corpus.top_down.get(i).cloned().flatten(),
            bottom_up: bottom_up.as_mut().and_then(|b| b[i].take()),
        });
    }
    events.extend(corpus.poses.iter().cloned().map(Event::Pose));
    events.extend(corpus.gaze.iter().copied().map(Event::Gaze));
    if let Some(bad) = events.iter().find(|e| !e.timestamp_ms().is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite timestamp in {bad:?}")));
    }
    let mut keyed: Vec<(usize, Event)> = events.into_iter().enumerate().collect();
    keyed.sort_by(|(ia, a), (ib, b)| {
        a.timestamp_ms()
            .total_cmp(&b.timestamp_ms())
            .then(a.rank().cmp(&b.rank()))
            .then(ia.cmp(ib))
    });
    Ok(keyed.into_iter().map(|(_, e)| e).collect())
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub records: Vec<OutputRecord>,
    pub transforms: Vec<TransformVector>,
    pub selections: Vec<FrameSelection>,
    pub notes: Vec<Note>,
    pub timings: Timings,
}

fn prepass(frames: &[Frame], config: &SessionConfig, threads: usize) -> Result<(Vec<SaliencyHeatmap>, Timings)> {
    let (w, h) = (config.working_width, config.working_height);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build a pool of {threads} threads: {e}")))?;
    let results: Vec<Result<(SaliencyHeatmap, Timings)>> = pool.install(|| {
        frames
            .par_iter()
            .map_init(
                || SpectralResidual::new(w, h),
                |detector, frame| {
                    let mut t = Timings::default();
                    let start = Instant::now();
                    let small = downscale(frame, w, h)?;
                    t.downscale = start.elapsed();
                    let start = Instant::now();
                    let hm = detector.detect(&small);
                    t.bottom_up = start.elapsed();
                    Ok((hm, t))
                },
            )
            .collect()
    });
    let mut maps = Vec::with_capacity(frames.len());
    let mut timings = Timings::default();
    for r in results {
        let (hm, t) = r?;
        timings.merge(&t);
        maps.push(hm);
    }
    Ok((maps, timings))
}

/// Runs the tracker over a corpus. With more than one thread the bottom-up
/// maps of every frame are computed up front on a pool of that size; the
/// session itself is always single-threaded, so output does not depend on
/// the thread count.
pub fn run_with_history(
    corpus: &Corpus,
    config: &RunConfig,
    history: Option<HistoricalTrajectories>,
    threads: usize,
) -> Result<RunOutput> {
    let session_config = config.session_config(corpus.fps)?;
    let mut timings = Timings::default();
    let bottom_up = if threads > 1 {
        let (maps, t) = prepass(&corpus.frames, &session_config, threads)?;
        timings.merge(&t);
        Some(maps)
    } else {
        None
    };
    let events = merge_events(corpus, bottom_up)?;
    let mut session = Session::new(session_config);
    if let Some(h) = history {
        session = session.with_history(h);
    }

    let mut out = RunOutput::default();
    let absorb = |step: crate::session::StepOutput, out: &mut RunOutput| {
        if let Some(t) = step.transform {
            out.records.push(OutputRecord::from(&t));
            out.transforms.push(t);
        }
        out.records.extend(step.gazes.iter().map(OutputRecord::from));
        out.selections.extend(step.selection);
        out.notes.extend(step.notes);
    };
    for event in events {
        let step = session.step(event)?;
        absorb(step, &mut out);
    }
    absorb(session.finish(), &mut out);
    timings.merge(session.timings());
    out.timings = timings;
    Ok(out)
}

/// As [`run_with_history`], reading other viewers' gaze from `config.history` when set.
pub fn run(corpus: &Corpus, config: &RunConfig, threads: usize) -> Result<RunOutput> {
    let history = match &config.history {
        Some(path) => Some(HistoricalTrajectories::read_csv(path)?),
        None => None,
    };
    run_with_history(corpus, config, history, threads)
}

/// Average number of frames examined per `target` accepted frames.
pub fn frames_cost(selections: &[FrameSelection], target: usize) -> Option<f64> {
    let accepted = selections.iter().filter(|s| s.accepted).count();
    (accepted > 0).then(|| target as f64 * selections.len() as f64 / accepted as f64)
}
