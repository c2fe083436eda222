//! Temporal saliency selection: DCT perceptual hashing, key-frame scene-cut
//! detection and the bottom-up → top-down attention handover.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::frame::{area_resample, Frame};

const HASH_GRID: usize = 32;
const HASH_BLOCK: usize = 8;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerceptualHash(pub u64);

impl fmt::Debug for PerceptualHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PerceptualHash({:016x})", self.0)
    }
}

pub fn hamming(a: PerceptualHash, b: PerceptualHash) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// Orthonormal DCT-II basis, `basis[k * N + n]`.
fn dct_basis() -> &'static [f64] {
    static BASIS: OnceLock<Vec<f64>> = OnceLock::new();
    BASIS.get_or_init(|| {
        let n = HASH_GRID;
        let mut b = vec![0.0; n * n];
        for k in 0..n {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                b[k * n + i] = scale * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos();
            }
        }
        b
    })
}

/// 2-D DCT-II of a `HASH_GRID`² block; only the first `rows` × `cols` coefficients are produced.
fn dct2_corner(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let n = HASH_GRID;
    let basis = dct_basis();
    // along x: tmp[y][v] = sum_x src[y][x] * basis[v][x]
    let mut tmp = vec![0.0; n * cols];
    for y in 0..n {
        for v in 0..cols {
            tmp[y * cols + v] = (0..n).map(|x| src[y * n + x] * basis[v * n + x]).sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for u in 0..rows {
        for v in 0..cols {
            out[u * cols + v] = (0..n).map(|y| tmp[y * cols + v] * basis[u * n + y]).sum();
        }
    }
    out
}

/// DCT pHash: 32×32 box downscale, 2-D DCT, the 8×8 low-frequency block
/// without its DC term plus coefficient (0, 8) as filler, each compared
/// against the median of those 64 values. The first selected coefficient
/// lands in the most significant bit.
pub fn phash(frame: &Frame) -> PerceptualHash {
    let src: Vec<f64> = frame.pixels.iter().map(|&p| p as f64).collect();
    let small = area_resample(&src, frame.width, frame.height, HASH_GRID, HASH_GRID);
    let corner = dct2_corner(&small, HASH_BLOCK, HASH_BLOCK + 1);

    let width = HASH_BLOCK + 1;
    let mut selected: Vec<f64> = Vec::with_capacity(64);
    for u in 0..HASH_BLOCK {
        for v in 0..HASH_BLOCK {
            if u == 0 && v == 0 {
                continue;
            }
            selected.push(corner[u * width + v]);
        }
    }
    selected.push(corner[HASH_BLOCK]);

    // flush rounding residue of flat content to exact zeros
    let scale = corner[0].abs().max(selected.iter().fold(0.0, |m: f64, c| m.max(c.abs())));
    let eps = scale * 1e-9;
    for c in selected.iter_mut() {
        if c.abs() <= eps {
            *c = 0.0;
        }
    }

    let mut sorted = selected.clone();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[31] + sorted[32]);

    let bits = selected
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &c)| if c > median { acc | (1u64 << (63 - i)) } else { acc });
    PerceptualHash(bits)
}

/// True iff the pHash distance between `prev` and `key` exceeds `cut_threshold`.
pub fn detect_scene_cut(prev: &Frame, key: &Frame, cut_threshold: u32) -> bool {
    hamming(phash(prev), phash(key)) > cut_threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Attention {
    BottomUp,
    TopDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionMode {
    pub mode: Attention,
    pub since_cut_frames: u64,
}

pub fn attention_mode(since_cut_frames: u64, bottom_up_window: u64) -> AttentionMode {
    let mode = if since_cut_frames < bottom_up_window {
        Attention::BottomUp
    } else {
        Attention::TopDown
    };
    AttentionMode { mode, since_cut_frames }
}

/// Frames of bottom-up dominance for a stream at `fps`, given the handover latency.
pub fn bottom_up_frames(fps: f64, handover_ms: f64) -> u64 {
    (handover_ms * fps / 1000.0).round().max(1.0) as u64
}

/// Single-writer since-cut counter.
#[derive(Debug, Clone)]
pub struct CutScheduler {
    since_cut: u64,
    bottom_up_window: u64,
}

impl CutScheduler {
    /// The stream start counts as a scene start.
    pub fn new(bottom_up_window: u64) -> Self {
        CutScheduler {
            since_cut: 0,
            bottom_up_window,
        }
    }

    pub fn mode(&self) -> AttentionMode {
        attention_mode(self.since_cut, self.bottom_up_window)
    }

    pub fn cut(&mut self) {
        self.since_cut = 0;
    }

    /// Called once per frame after it has been processed.
    pub fn advance(&mut self) {
        self.since_cut = self.since_cut.saturating_add(1);
    }
}
