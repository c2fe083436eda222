//! Synthetic scenarios with ground truth.
//!
//! Scenes are rendered on a dark background. Object centers live on the
//! pixel-center lattice of the working resolution, so a detector running at
//! that resolution can recover them exactly. The attended point drives true
//! gaze (with a lag and tremor), rough gaze (with an injected offset, noise
//! and blinks) and, for video-on-demand content, other users' gaze.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::RoughGazeSample;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geom::Point;
use crate::heatmap::{pixel_to_screen, HeatmapSource, SaliencyHeatmap};
use crate::session::HeadPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    SingleBlob,
    MultiBlob(usize),
    LargeRegion,
    Blank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub kind: SegmentKind,
    pub length_frames: usize,
    /// Starts with a hard transition on a key frame.
    #[serde(default)]
    pub cut: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetChange {
    pub from_frame: u64,
    pub offset: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseJump {
    pub frame: u64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub fps: f64,
    /// Checked against the segment total when present.
    pub duration_s: Option<f64>,
    pub segments: Vec<Segment>,
    pub width: usize,
    pub height: usize,
    /// Working resolution whose pixel centers hold object positions.
    pub lattice_width: usize,
    pub lattice_height: usize,
    pub gaze_noise_sigma: f64,
    pub blink_rate_per_min: f64,
    pub samples_per_frame: usize,
    pub offsets: Vec<OffsetChange>,
    pub pose_jumps: Vec<PoseJump>,
    /// Pose jump emitted with every offset change after frame 0.
    pub offset_pose_jump: f64,
    pub pose_jitter: f64,
    pub face_rotation_deg: f64,
    /// Frames between one-pixel hops of the attended object; 0 keeps it still.
    pub walk_period: usize,
    pub gaze_lag_frames: usize,
    /// Gaussian blob sigma in working pixels.
    pub blob_sigma: f64,
    pub blob_amplitude: f64,
    pub background: f64,
    pub large_region_fraction: f64,
    /// Additional key frames every this many frames; 0 means cuts and frame 0 only.
    pub key_frame_interval: usize,
    pub history_users: usize,
    pub history_sigma: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            fps: 30.0,
            duration_s: None,
            segments: Vec::new(),
            width: 136,
            height: 136,
            lattice_width: 68,
            lattice_height: 68,
            gaze_noise_sigma: 0.01,
            blink_rate_per_min: 17.0,
            samples_per_frame: 2,
            offsets: Vec::new(),
            pose_jumps: Vec::new(),
            offset_pose_jump: 0.05,
            pose_jitter: 0.0002,
            face_rotation_deg: 0.0,
            walk_period: 15,
            gaze_lag_frames: 1,
            blob_sigma: 1.8,
            blob_amplitude: 200.0,
            background: 20.0,
            large_region_fraction: 0.65,
            key_frame_interval: 0,
            history_users: 0,
            history_sigma: 0.01,
        }
    }
}

fn check(ok: bool, field: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason()))
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = Error::parse_json(text, "scenario")?;
        config.validate()?;
        Ok(config)
    }

    pub fn total_frames(&self) -> usize {
        self.segments.iter().map(|s| s.length_frames).sum()
    }

    pub fn frame_time_ms(&self, frame: u64) -> f64 {
        frame as f64 * 1000.0 / self.fps
    }

    pub fn validate(&self) -> Result<()> {
        check(self.fps.is_finite() && self.fps > 0.0, "fps", || format!("must be positive, got {}", self.fps))?;
        check(!self.segments.is_empty(), "segments", || "at least one segment is required".into())?;
        for (i, s) in self.segments.iter().enumerate() {
            check(s.length_frames > 0, &format!("segments[{i}].length_frames"), || "must be positive".into())?;
            if let SegmentKind::MultiBlob(k) = s.kind {
                check((1..=8).contains(&k), &format!("segments[{i}].kind"), || {
                    format!("MultiBlob count must be in 1..=8, got {k}")
                })?;
            }
        }
        let total = self.total_frames();
        if let Some(d) = self.duration_s {
            check(
                d.is_finite() && (d * self.fps).round() as usize == total,
                "duration_s",
                || format!("{d} s at {} fps does not match the {total} segment frames", self.fps),
            )?;
        }
        check(self.lattice_width >= 8 && self.lattice_height >= 8, "lattice_width", || {
            "lattice must be at least 8x8".into()
        })?;
        check(self.width >= 8 && self.height >= 8, "width", || "frames must be at least 8x8".into())?;
        check(finite_nonneg(self.gaze_noise_sigma), "gaze_noise_sigma", || {
            format!("must be finite and non-negative, got {}", self.gaze_noise_sigma)
        })?;
        check(finite_nonneg(self.blink_rate_per_min), "blink_rate_per_min", || {
            format!("must be finite and non-negative, got {}", self.blink_rate_per_min)
        })?;
        check(self.samples_per_frame >= 1, "samples_per_frame", || "must be at least 1".into())?;
        for (i, w) in self.offsets.windows(2).enumerate() {
            check(w[0].from_frame < w[1].from_frame, &format!("offsets[{}].from_frame", i + 1), || {
                "offset schedule frames must be strictly increasing".into()
            })?;
        }
        for (i, o) in self.offsets.iter().enumerate() {
            check(o.offset.is_finite(), &format!("offsets[{i}].offset"), || "must be finite".into())?;
        }
        for (i, w) in self.pose_jumps.windows(2).enumerate() {
            check(w[0].frame < w[1].frame, &format!("pose_jumps[{}].frame", i + 1), || {
                "pose schedule frames must be strictly increasing".into()
            })?;
        }
        for (i, p) in self.pose_jumps.iter().enumerate() {
            check(finite_nonneg(p.magnitude), &format!("pose_jumps[{i}].magnitude"), || {
                "must be finite and non-negative".into()
            })?;
        }
        check(finite_nonneg(self.offset_pose_jump), "offset_pose_jump", || "must be finite and non-negative".into())?;
        check(finite_nonneg(self.pose_jitter), "pose_jitter", || "must be finite and non-negative".into())?;
        check(self.face_rotation_deg.is_finite(), "face_rotation_deg", || "must be finite".into())?;
        check(self.blob_sigma.is_finite() && self.blob_sigma > 0.0, "blob_sigma", || "must be positive".into())?;
        check(
            (0.0..=255.0).contains(&self.background) && (0.0..=255.0).contains(&self.blob_amplitude),
            "blob_amplitude",
            || "background and amplitude must lie in [0, 255]".into(),
        )?;
        check(
            self.large_region_fraction > 0.0 && self.large_region_fraction <= std::f64::consts::FRAC_PI_4,
            "large_region_fraction",
            || format!("must be in (0, pi/4] so the disc fits, got {}", self.large_region_fraction),
        )?;
        check(finite_nonneg(self.history_sigma), "history_sigma", || "must be finite and non-negative".into())?;
        Ok(())
    }

    pub fn offset_at(&self, frame: u64) -> Point {
        self.offsets
            .iter()
            .take_while(|o| o.from_frame <= frame)
            .last()
            .map_or(Point::ZERO, |o| o.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFrame {
    pub frame: u64,
    pub t_ms: f64,
    pub gaze: Point,
    /// The object the viewer attends to, without lag or tremor.
    pub attended: Point,
    pub offset: Point,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub fps: f64,
    pub frames: Vec<TruthFrame>,
    pub cuts: Vec<u64>,
    /// Frames carrying a pose jump, whether or not the offset changed.
    pub pose_jumps: Vec<u64>,
    pub offset_changes: Vec<u64>,
}

impl GroundTruth {
    pub fn frame(&self, index: u64) -> Option<&TruthFrame> {
        self.frames.get(index as usize).filter(|f| f.frame == index)
    }
}

/// A rendered scenario, before rough gaze is simulated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub frames: Vec<Frame>,
    pub top_down: Vec<SaliencyHeatmap>,
    pub truth: GroundTruth,
    /// `(user_id, frame_index, point)` rows from other viewers.
    pub history: Vec<(u64, u64, Point)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blink {
    pub first_sample: usize,
    pub len: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct RoughTrace {
    pub samples: Vec<RoughGazeSample>,
    pub poses: Vec<HeadPose>,
    pub blinks: Vec<Blink>,
}

// independent random streams per concern so that knobs do not perturb each other
const STREAM_SCENE: u64 = 1;
const STREAM_TREMOR: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_BLINK: u64 = 4;
const STREAM_POSE: u64 = 5;
const STREAM_HISTORY: u64 = 6;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    c: i64,
    r: i64,
}

struct Lattice {
    w: usize,
    h: usize,
}

impl Lattice {
    fn point(&self, cell: Cell) -> Point {
        pixel_to_screen(cell.c as usize, cell.r as usize, self.w, self.h)
    }

    fn margin(&self) -> (i64, i64) {
        ((self.w as f64 * 0.12).round() as i64, (self.h as f64 * 0.12).round() as i64)
    }

    fn clamp(&self, cell: Cell) -> Cell {
        let (mx, my) = self.margin();
        Cell {
            c: cell.c.clamp(mx, self.w as i64 - 1 - mx),
            r: cell.r.clamp(my, self.h as i64 - 1 - my),
        }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Cell {
        let (mx, my) = self.margin();
        Cell {
            c: rng.random_range(mx..=self.w as i64 - 1 - mx),
            r: rng.random_range(my..=self.h as i64 - 1 - my),
        }
    }

    /// A random cell at least `min_dist` away from every cell in `avoid`.
    fn random_away(&self, rng: &mut ChaCha8Rng, avoid: &[Cell], min_dist: f64) -> Cell {
        let mut best = self.random(rng);
        let mut best_d = -1.0;
        for _ in 0..256 {
            let cand = self.random(rng);
            let d = avoid
                .iter()
                .map(|a| self.point(*a).dist(self.point(cand)))
                .fold(f64::INFINITY, f64::min);
            if d >= min_dist {
                return cand;
            }
            if d > best_d {
                best = cand;
                best_d = d;
            }
        }
        best
    }

    fn in_disc(&self, cell: Cell, radius: f64) -> bool {
        self.point(cell).dist(Point::new(0.5, 0.5)) <= radius
    }
}

fn render_blobs(config: &ScenarioConfig, centers: &[Point], pixels: &mut [u8]) {
    let (w, h) = (config.width, config.height);
    let sx = config.blob_sigma * w as f64 / config.lattice_width as f64;
    let sy = config.blob_sigma * h as f64 / config.lattice_height as f64;
    let mut acc = vec![config.background; w * h];
    for p in centers {
        let cx = p.x * w as f64;
        let cy = (1.0 - p.y) * h as f64;
        let x0 = (cx - 6.0 * sx).floor().max(0.0) as usize;
        let x1 = ((cx + 6.0 * sx).ceil().max(0.0) as usize).min(w);
        let y0 = (cy - 6.0 * sy).floor().max(0.0) as usize;
        let y1 = ((cy + 6.0 * sy).ceil().max(0.0) as usize).min(h);
        for y in y0..y1 {
            let dy = (y as f64 + 0.5 - cy) / sy;
            for x in x0..x1 {
                let dx = (x as f64 + 0.5 - cx) / sx;
                acc[y * w + x] += config.blob_amplitude * (-0.5 * (dx * dx + dy * dy)).exp();
            }
        }
    }
    for (dst, v) in pixels.iter_mut().zip(acc) {
        *dst = v.clamp(0.0, 255.0).round() as u8;
    }
}

fn render_disc(w: usize, h: usize, radius: f64, inside: u8, outside: u8) -> Vec<u8> {
    (0..w * h)
        .map(|i| {
            let x = ((i % w) as f64 + 0.5) / w as f64 - 0.5;
            let y = ((i / w) as f64 + 0.5) / h as f64 - 0.5;
            if x * x + y * y <= radius * radius {
                inside
            } else {
                outside
            }
        })
        .collect()
}

const TOP_DOWN_SIGMA: f64 = 1.5;

fn top_down_blobs(lattice: &Lattice, cells: &[Cell]) -> Vec<u8> {
    (0..lattice.w * lattice.h)
        .map(|i| {
            let (x, y) = ((i % lattice.w) as f64, (i / lattice.w) as f64);
            let v = cells
                .iter()
                .map(|c| {
                    let d2 = (x - c.c as f64).powi(2) + (y - c.r as f64).powi(2);
                    255.0 * (-d2 / (2.0 * TOP_DOWN_SIGMA * TOP_DOWN_SIGMA)).exp()
                })
                .fold(0.0, f64::max);
            v.round() as u8
        })
        .collect()
}

const EIGHT: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Renders frames, top-down maps and ground truth for a validated config.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let lattice = Lattice {
        w: config.lattice_width,
        h: config.lattice_height,
    };
    let mut scene_rng = rng(config.seed, STREAM_SCENE);
    let mut tremor_rng = rng(config.seed, STREAM_TREMOR);
    let tremor = gaussian(config.gaze_noise_sigma / 2.0);
    let disc_radius = (config.large_region_fraction / std::f64::consts::PI).sqrt();
    // the attended sub-region stays well inside the large disc
    let sub_radius = disc_radius * 0.6;

    let total = config.total_frames();
    let mut frames = Vec::with_capacity(total);
    let mut top_down = Vec::with_capacity(total);
    let mut attended = Vec::with_capacity(total);
    let mut cuts = Vec::new();
    let mut segment_of = Vec::with_capacity(total);

    let mut walker = lattice.random(&mut scene_rng);
    let mut index = 0u64;
    for (si, seg) in config.segments.iter().enumerate() {
        if seg.cut && index > 0 {
            walker = lattice.random_away(&mut scene_rng, &[walker], 0.3);
            cuts.push(index);
        }
        if seg.kind == SegmentKind::LargeRegion && !lattice.in_disc(walker, sub_radius) {
            while !lattice.in_disc(walker, sub_radius) {
                walker = lattice.random(&mut scene_rng);
            }
        }
        let others: Vec<Cell> = match seg.kind {
            SegmentKind::MultiBlob(k) => {
                let mut placed = vec![walker];
                for _ in 1..k {
                    let c = lattice.random_away(&mut scene_rng, &placed, 0.25);
                    placed.push(c);
                }
                placed.split_off(1)
            }
            _ => Vec::new(),
        };
        for local in 0..seg.length_frames {
            if local > 0 && config.walk_period > 0 && index.is_multiple_of(config.walk_period as u64) {
                let (dc, dr) = EIGHT[scene_rng.random_range(0..8)];
                let next = lattice.clamp(Cell {
                    c: walker.c + dc,
                    r: walker.r + dr,
                });
                if seg.kind != SegmentKind::LargeRegion || lattice.in_disc(next, sub_radius) {
                    walker = next;
                }
            }
            let key = index == 0
                || (seg.cut && local == 0)
                || (config.key_frame_interval > 0 && index.is_multiple_of(config.key_frame_interval as u64));
            let (w, h) = (config.width, config.height);
            let mut cells = vec![walker];
            cells.extend(&others);
            let (pixels, td) = match seg.kind {
                SegmentKind::SingleBlob | SegmentKind::MultiBlob(_) => {
                    let mut px = vec![0u8; w * h];
                    let centers: Vec<Point> = cells.iter().map(|c| lattice.point(*c)).collect();
                    render_blobs(config, &centers, &mut px);
                    (px, top_down_blobs(&lattice, &cells))
                }
                SegmentKind::LargeRegion => {
                    let inside = (config.background + config.blob_amplitude).min(255.0).round() as u8;
                    (
                        render_disc(w, h, disc_radius, inside, config.background.round() as u8),
                        render_disc(lattice.w, lattice.h, disc_radius, 255, 0),
                    )
                }
                SegmentKind::Blank => (
                    vec![config.background.round() as u8; w * h],
                    vec![0u8; lattice.w * lattice.h],
                ),
            };
            let t_ms = config.frame_time_ms(index);
            frames.push(Frame::new(index, t_ms, w, h, pixels)?.with_key_frame(key));
            top_down.push(SaliencyHeatmap::from_values(
                lattice.w,
                lattice.h,
                td,
                HeatmapSource::TopDownExternal,
            )?);
            attended.push(lattice.point(walker));
            segment_of.push(si);
            index += 1;
        }
    }

    let mut truth_frames = Vec::with_capacity(total);
    for f in 0..total {
        let look = attended[f.saturating_sub(config.gaze_lag_frames)];
        let jitter = Point::new(tremor.sample(&mut tremor_rng), tremor.sample(&mut tremor_rng));
        let g = look + jitter;
        truth_frames.push(TruthFrame {
            frame: f as u64,
            t_ms: config.frame_time_ms(f as u64),
            gaze: Point::new(g.x.clamp(0.0, 1.0), g.y.clamp(0.0, 1.0)),
            attended: attended[f],
            offset: config.offset_at(f as u64),
            segment: segment_of[f],
        });
    }

    let offset_changes: Vec<u64> = config
        .offsets
        .iter()
        .map(|o| o.from_frame)
        .filter(|&f| f > 0 && (f as usize) < total)
        .collect();
    let mut pose_jumps: Vec<u64> = offset_changes
        .iter()
        .copied()
        .chain(config.pose_jumps.iter().map(|p| p.frame).filter(|&f| (f as usize) < total))
        .collect();
    pose_jumps.sort_unstable();
    pose_jumps.dedup();

    let mut history = Vec::new();
    if config.history_users > 0 {
        let mut hrng = rng(config.seed, STREAM_HISTORY);
        let spread = gaussian(config.history_sigma);
        for (f, a) in attended.iter().enumerate() {
            for u in 0..config.history_users {
                let p = Point::new(a.x + spread.sample(&mut hrng), a.y + spread.sample(&mut hrng));
                history.push((u as u64, f as u64, p));
            }
        }
    }

    Ok(Scenario {
        config: config.clone(),
        frames,
        top_down,
        truth: GroundTruth {
            fps: config.fps,
            frames: truth_frames,
            cuts,
            pose_jumps,
            offset_changes,
        },
        history,
    })
}

/// Timestamp of the `k`-th of `per_frame` samples taken during frame `frame`.
pub fn sample_time_ms(fps: f64, frame: u64, k: usize, per_frame: usize) -> f64 {
    (frame as f64 + (k as f64 + 0.5) / per_frame as f64) * 1000.0 / fps
}

/// Rough gaze samples (offset + noise + blinks) and the head-pose stream.
pub fn simulate_rough_gaze(truth: &GroundTruth, config: &ScenarioConfig) -> RoughTrace {
    let spf = config.samples_per_frame;
    let sigma = config.gaze_noise_sigma;
    let noise = gaussian(sigma);
    let mut noise_rng = rng(config.seed, STREAM_NOISE);
    let mut samples = Vec::with_capacity(truth.frames.len() * spf);
    for tf in &truth.frames {
        for k in 0..spf {
            let base = tf.gaze + tf.offset;
            let p = Point::new(base.x + noise.sample(&mut noise_rng), base.y + noise.sample(&mut noise_rng));
            samples.push(RoughGazeSample {
                timestamp_ms: sample_time_ms(config.fps, tf.frame, k, spf),
                frame_index: tf.frame,
                position: p,
            });
        }
    }

    // a fixed count, one blink per equal slot of the sample stream
    let minutes = truth.frames.len() as f64 / config.fps / 60.0;
    let n = samples.len();
    let count = ((config.blink_rate_per_min * minutes).round() as usize).min(n);
    let mut blink_rng = rng(config.seed, STREAM_BLINK);
    let mut blinks = Vec::with_capacity(count);
    for i in 0..count {
        let (lo, hi) = (i * n / count, (i + 1) * n / count);
        let first = blink_rng.random_range(lo..hi);
        let len = if first + 1 < hi { blink_rng.random_range(1..=2) } else { 1 };
        let magnitude = sigma * blink_rng.random_range(8.0..12.0);
        for s in &mut samples[first..first + len] {
            s.position.y -= magnitude;
        }
        blinks.push(Blink {
            first_sample: first,
            len,
            magnitude,
        });
    }

    let mut pose_rng = rng(config.seed, STREAM_POSE);
    let jitter = gaussian(config.pose_jitter);
    let mut base: Vec<f64> = (0..6).map(|_| pose_rng.random_range(0.3..0.7)).collect();
    let mut poses = Vec::with_capacity(truth.frames.len());
    for tf in &truth.frames {
        let jump = if truth.offset_changes.contains(&tf.frame) {
            config.offset_pose_jump
        } else {
            0.0
        } + config
            .pose_jumps
            .iter()
            .find(|p| p.frame == tf.frame)
            .map_or(0.0, |p| p.magnitude);
        if jump > 0.0 {
            let dir: Vec<f64> = (0..6).map(|_| pose_rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for (b, d) in base.iter_mut().zip(dir) {
                *b += jump * d / norm;
            }
        }
        poses.push(HeadPose {
            timestamp_ms: tf.t_ms,
            pose: base.iter().map(|b| b + jitter.sample(&mut pose_rng)).collect(),
            face_rotation_deg: config.face_rotation_deg,
        });
    }

    RoughTrace { samples, poses, blinks }
}

/// A smooth cosine texture, contrast-stretched into [40, 215]. `shift`
/// translates it horizontally; different seeds give unrelated textures.
pub fn texture_frame(seed: u64, width: usize, height: usize, shift: f64) -> Frame {
    let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let waves: Vec<[f64; 5]> = (0..6)
        .map(|_| [0.5 + 3.5 * next(), 0.5 + 3.5 * next(), std::f64::consts::TAU * next(), std::f64::consts::TAU * next(), 0.5 + 0.5 * next()])
        .collect();
    let raw: Vec<f64> = (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as f64 + shift, (i / width) as f64);
            waves
                .iter()
                .map(|[fx, fy, px, py, a]| {
                    a * (std::f64::consts::TAU * fx * x / width as f64 + px).cos()
                        * (std::f64::consts::TAU * fy * y / height as f64 + py).cos()
                })
                .sum()
        })
        .collect();
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pixels = raw.iter().map(|v| (40.0 + 175.0 * (v - lo) / (hi - lo)).round() as u8).collect();
    Frame::new(0, 0.0, width, height, pixels).expect("buffer matches dimensions")
}
