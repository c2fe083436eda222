//! Grayscale frames, area-weighted resampling and binary PGM (P5) I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One 8-bit grayscale video frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub timestamp_ms: f64,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub is_key_frame: bool,
}

impl Frame {
    pub fn new(index: u64, timestamp_ms: f64, width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!("frame {index} has zero dimension {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "frame {index}: pixel buffer has {} bytes, expected {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(Frame {
            index,
            timestamp_ms,
            width,
            height,
            pixels,
            is_key_frame: false,
        })
    }

    pub fn with_key_frame(mut self, key: bool) -> Self {
        self.is_key_frame = key;
        self
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / self.pixels.len() as f64
    }
}

/// Source span `[lo, hi)` of destination cell `i` and the per-source-pixel overlap weights.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    (w > 0.0).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

/// Resamples `values` (row-major `src_w`×`src_h`) by area-weighted averaging.
pub(crate) fn area_resample(values: &[f64], src_w: usize, src_h: usize, dst_w: usize, dst_h: usize) -> Vec<f64> {
    let wx = axis_weights(src_w, dst_w);
    let wy = axis_weights(src_h, dst_h);

    // horizontal pass: src_h rows x dst_w columns
    let mut rows = vec![0.0; src_h * dst_w];
    for y in 0..src_h {
        let line = &values[y * src_w..(y + 1) * src_w];
        for (x, taps) in wx.iter().enumerate() {
            let (sum, area) = taps.iter().fold((0.0, 0.0), |(s, a), &(i, w)| (s + line[i] * w, a + w));
            rows[y * dst_w + x] = sum / area;
        }
    }

    let mut out = vec![0.0; dst_w * dst_h];
    for (y, taps) in wy.iter().enumerate() {
        let area: f64 = taps.iter().map(|&(_, w)| w).sum();
        for x in 0..dst_w {
            let sum: f64 = taps.iter().map(|&(i, w)| rows[i * dst_w + x] * w).sum();
            out[y * dst_w + x] = sum / area;
        }
    }
    out
}

/// Box-filter resample of `frame` to `target_w`×`target_h`. Index, timestamp and key flag are kept.
pub fn downscale(frame: &Frame, target_w: usize, target_h: usize) -> Result<Frame> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidArgument(format!("zero-sized target {target_w}x{target_h}")));
    }
    if frame.width == target_w && frame.height == target_h {
        return Ok(frame.clone());
    }
    let src: Vec<f64> = frame.pixels.iter().map(|&p| p as f64).collect();
    let out = area_resample(&src, frame.width, frame.height, target_w, target_h);
    let pixels = out.iter().map(|&v| (v + 0.5).floor().clamp(0.0, 255.0) as u8).collect();
    Ok(Frame {
        index: frame.index,
        timestamp_ms: frame.timestamp_ms,
        width: target_w,
        height: target_h,
        pixels,
        is_key_frame: frame.is_key_frame,
    })
}

/// Decoded P5 raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Gray8, String> {
    let mut pos = 0usize;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token()?;
    if magic != "P5" {
        return Err(format!("unsupported magic {magic:?}, expected P5"));
    }
    let mut num = |name: &str| -> std::result::Result<usize, String> {
        token()?.parse::<usize>().map_err(|e| format!("bad {name}: {e}"))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    if width == 0 || height == 0 {
        return Err(format!("zero dimension {width}x{height}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(format!("raster truncated: have {} bytes, need {need}", bytes.len().saturating_sub(pos)));
    }
    Ok(Gray8 {
        width,
        height,
        pixels: bytes[pos..pos + need].to_vec(),
    })
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn read_pgm(path: &Path) -> Result<Gray8> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_pgm(width, height, pixels)).map_err(|e| Error::io(path, e))
}

pub fn frame_file_name(index: u64) -> String {
    format!("frame_{index:06}.pgm")
}

pub fn top_down_file_name(index: u64) -> String {
    format!("sal_td_{index:06}.pgm")
}
