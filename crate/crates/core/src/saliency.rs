//! Saliency detectors.
//!
//! The bottom-up detector is the spectral residual method: the log(1 + amplitude)
//! spectrum minus its 3×3 local mean, recombined with the original phase and
//! transformed back. Top-down maps are not computed here; they are ingested
//! from files produced by an external detector. Historical gaze points can be
//! rasterized into a third kind of map.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::frame::Frame;
use crate::geom::Point;
use crate::heatmap::{normalize_heatmap, HeatmapSource, SaliencyHeatmap};

/// Anything that turns a working-resolution frame into a normalized heatmap.
pub trait SaliencyDetector: Send + Sync {
    fn detect(&self, frame: &Frame) -> SaliencyHeatmap;

    fn source(&self) -> HeatmapSource;
}

struct Plans {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (w, h) = (self.width, self.height);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for line in data.chunks_exact_mut(w) {
            row.process(line);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = data[y * w + x];
            }
            col.process(&mut column);
            for y in 0..h {
                data[y * w + x] = column[y];
            }
        }
    }
}

/// 3×3 mean with wrap-around borders (the spectrum is periodic).
fn box3_wrap(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dy in [h - 1, 0, 1] {
                let yy = (y + dy) % h;
                for dx in [w - 1, 0, 1] {
                    s += src[yy * w + (x + dx) % w];
                }
            }
            out[y * w + x] = s / 9.0;
        }
    }
    out
}

/// 3×3 mean with replicated borders.
fn box3_clamp(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let ys = [y.saturating_sub(1), y, (y + 1).min(h - 1)];
        for x in 0..w {
            let xs = [x.saturating_sub(1), x, (x + 1).min(w - 1)];
            let mut s = 0.0;
            for &yy in &ys {
                for &xx in &xs {
                    s += src[yy * w + xx];
                }
            }
            out[y * w + x] = s / 9.0;
        }
    }
    out
}

/// Maps a raw map to a heatmap, treating numerically flat maps as constant.
fn finish(raw: Vec<f64>, w: usize, h: usize, source: HeatmapSource) -> SaliencyHeatmap {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = hi - lo;
    if spread.is_nan() || spread <= 1e-12 * hi.abs().max(f64::MIN_POSITIVE) {
        return SaliencyHeatmap {
            width: w,
            height: h,
            values: vec![0; w * h],
            source,
        };
    }
    normalize_heatmap(&raw, w, h, source).expect("spectral residual output is finite")
}

/// Spectral residual bottom-up detector. Plans for the working grid are cached.
pub struct SpectralResidual {
    plans: Plans,
}

impl SpectralResidual {
    pub fn new(width: usize, height: usize) -> Self {
        SpectralResidual {
            plans: Plans::new(width, height),
        }
    }

    pub fn raw_map(&self, frame: &Frame) -> Vec<f64> {
        let owned;
        let plans = if frame.width == self.plans.width && frame.height == self.plans.height {
            &self.plans
        } else {
            owned = Plans::new(frame.width, frame.height);
            &owned
        };
        let (w, h) = (frame.width, frame.height);
        let mut spec: Vec<Complex64> = frame
            .pixels
            .iter()
            .map(|&p| Complex64::new(p as f64, 0.0))
            .collect();
        plans.transform(&mut spec, false);

        let amp: Vec<f64> = spec.iter().map(|c| c.norm()).collect();
        let peak = amp.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return vec![0.0; w * h];
        }
        let floor = peak * 1e-9;
        // log1p keeps exact spectral zeros (hard edges) from dominating the residual
        let log_amp: Vec<f64> = amp.iter().map(|&a| a.ln_1p()).collect();
        let local = box3_wrap(&log_amp, w, h);

        for (i, c) in spec.iter_mut().enumerate() {
            *c = if amp[i] > floor {
                let residual = log_amp[i] - local[i];
                *c / amp[i] * residual.exp()
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        plans.transform(&mut spec, true);

        let energy: Vec<f64> = spec.iter().map(|c| c.norm_sqr()).collect();
        box3_clamp(&energy, w, h)
    }
}

impl SaliencyDetector for SpectralResidual {
    fn detect(&self, frame: &Frame) -> SaliencyHeatmap {
        finish(self.raw_map(frame), frame.width, frame.height, HeatmapSource::BottomUp)
    }

    fn source(&self) -> HeatmapSource {
        HeatmapSource::BottomUp
    }
}

/// Rasterizes gaze points into a `width`×`height` density map, smoothed 3×3.
pub fn historical_heatmap(points: &[Point], width: usize, height: usize) -> SaliencyHeatmap {
    let mut counts = vec![0.0; width * height];
    for p in points.iter().filter(|p| p.is_finite()) {
        let c = ((p.x * width as f64).floor().max(0.0) as usize).min(width - 1);
        let r = (((1.0 - p.y) * height as f64).floor().max(0.0) as usize).min(height - 1);
        counts[r * width + c] += 1.0;
    }
    finish(box3_clamp(&counts, width, height), width, height, HeatmapSource::Historical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::downscale;
    use crate::heatmap::{extract_feature_vector, pixel_to_screen, SelectionParams};

    fn frame(w: usize, h: usize, px: Vec<u8>) -> Frame {
        Frame::new(0, 0.0, w, h, px).unwrap()
    }

    fn square_scene(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> Frame {
        let mut px = vec![16u8; w * h];
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                px[y * w + x] = 235;
            }
        }
        frame(w, h, px)
    }

    #[test]
    fn constant_frame_gives_zero_map() {
        let sr = SpectralResidual::new(68, 68);
        for v in [0u8, 1, 128, 255] {
            let hm = sr.detect(&frame(68, 68, vec![v; 68 * 68]));
            assert!(hm.values.iter().all(|&x| x == 0), "gray {v}");
        }
    }

    #[test]
    fn bright_square_peak_inside_dilated_box() {
        let sr = SpectralResidual::new(68, 68);
        for (x0, y0) in [(10, 10), (30, 40), (50, 8), (5, 55), (32, 32)] {
            let hm = sr.detect(&square_scene(68, 68, x0, y0, 4));
            let (ax, ay) = hm.argmax();
            assert!(
                ax + 2 >= x0 && ax <= x0 + 3 + 2 && ay + 2 >= y0 && ay <= y0 + 3 + 2,
                "square at ({x0},{y0}) but argmax ({ax},{ay})"
            );
        }
    }

    #[test]
    fn deterministic() {
        let sr = SpectralResidual::new(68, 68);
        let f = square_scene(68, 68, 20, 20, 4);
        assert_eq!(sr.detect(&f), sr.detect(&f));
        // an independently planned detector agrees bit for bit
        assert_eq!(sr.detect(&f), SpectralResidual::new(10, 10).detect(&f));
    }

    #[test]
    fn argmax_stable_across_resolutions() {
        let sr68 = SpectralResidual::new(68, 68);
        let sr160 = SpectralResidual::new(160, 90);
        let mut worst: f64 = 0.0;
        for i in 0..24usize {
            let x0 = 80 + (i * 137) % 1060;
            let y0 = 60 + (i * 89) % 560;
            let hd = square_scene(1280, 720, x0, y0, 40);
            let a = sr68.detect(&downscale(&hd, 68, 68).unwrap());
            let b = sr160.detect(&downscale(&hd, 160, 90).unwrap());
            let (ax, ay) = a.argmax();
            let (bx, by) = b.argmax();
            let pa = pixel_to_screen(ax, ay, 68, 68);
            let pb = pixel_to_screen(bx, by, 160, 90);
            worst = worst.max(pa.dist(pb));
        }
        assert!(worst <= 0.08, "argmax drift {worst}");
    }

    #[test]
    fn small_blob_is_single_concentrated_region() {
        let sr = SpectralResidual::new(68, 68);
        let (cx, cy) = (30usize, 20usize);
        let px = (0..68 * 68)
            .map(|i| {
                let (x, y) = ((i % 68) as f64, (i / 68) as f64);
                let d2 = (x - cx as f64).powi(2) + (y - cy as f64).powi(2);
                (20.0 + 200.0 * (-d2 / (2.0 * 1.8 * 1.8)).exp()).round() as u8
            })
            .collect();
        let hm = sr.detect(&frame(68, 68, px));
        let fv = extract_feature_vector(&hm, SelectionParams::default(), 0)
            .into_vector()
            .expect("accepted");
        assert_eq!(fv.n, 1);
        assert_eq!(fv.peaks[0], pixel_to_screen(cx, cy, 68, 68));
    }

    #[test]
    fn historical_points_concentrate() {
        let pts: Vec<Point> = (0..20)
            .map(|i| Point::new(0.4 + 0.002 * (i % 3) as f64, 0.7 - 0.002 * (i % 4) as f64))
            .collect();
        let hm = historical_heatmap(&pts, 68, 68);
        assert_eq!(hm.source, HeatmapSource::Historical);
        let fv = extract_feature_vector(&hm, SelectionParams::default(), 0)
            .into_vector()
            .expect("accepted");
        assert_eq!(fv.n, 1);
        assert!(fv.peaks[0].dist(Point::new(0.4, 0.7)) < 0.03);
        assert!(historical_heatmap(&[], 68, 68).values.iter().all(|&v| v == 0));
    }
}
