//! Spatial saliency selection: heatmap normalization, binarization,
//! 8-connected region labeling, the concentration score and per-frame
//! feature vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeatmapSource {
    BottomUp,
    TopDownExternal,
    Historical,
}

/// Normalized 8-bit saliency grid at the working resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaliencyHeatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
    pub source: HeatmapSource,
}

impl SaliencyHeatmap {
    /// Wraps already-normalized values, e.g. an externally produced map read from disk.
    pub fn from_values(width: usize, height: usize, values: Vec<u8>, source: HeatmapSource) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "heatmap {width}x{height} with {} values",
                values.len()
            )));
        }
        Ok(SaliencyHeatmap {
            width,
            height,
            values,
            source,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn total_area(&self) -> usize {
        self.width * self.height
    }

    /// Row-major index of the global maximum (smallest index on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

/// Min-max maps `raw` onto `[0, 255]`, rounding half up. Constant input maps to all zeros.
pub fn normalize_heatmap(raw: &[f64], width: usize, height: usize, source: HeatmapSource) -> Result<SaliencyHeatmap> {
    if raw.is_empty() || width == 0 || height == 0 || raw.len() != width * height {
        return Err(Error::InvalidInput(format!(
            "raw grid {width}x{height} with {} values",
            raw.len()
        )));
    }
    if let Some(bad) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite saliency value at index {bad}")));
    }
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let values = if hi > lo {
        let span = hi - lo;
        raw.iter()
            .map(|&v| ((v - lo) / span * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect()
    } else {
        vec![0; raw.len()]
    };
    Ok(SaliencyHeatmap {
        width,
        height,
        values,
        source,
    })
}

/// Binary salient/background mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask buffer size");
        Mask { width, height, bits }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// A pixel is salient iff its value is at least `threshold`.
pub fn binarize(heatmap: &SaliencyHeatmap, threshold: u8) -> Mask {
    Mask {
        width: heatmap.width,
        height: heatmap.height,
        bits: heatmap.values.iter().map(|&v| v >= threshold).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub label: u32,
    pub area_px: usize,
    /// Pixel `(x, y)` holding the region's maximum saliency.
    pub peak: (usize, usize),
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // keep the smaller provisional label as root so roots follow raster order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labeling with 8-connectivity.
///
/// Labels are numbered from 1 in the row-major order of each component's first
/// pixel. Peaks break ties toward the smallest row-major index.
pub fn connected_components(mask: &Mask, heatmap: &SaliencyHeatmap) -> Vec<Region> {
    assert_eq!(
        (mask.width, mask.height),
        (heatmap.width, heatmap.height),
        "mask and heatmap dimensions differ"
    );
    let (w, h) = (mask.width, mask.height);
    let mut provisional = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.bits[i] {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut k = 0;
            if x > 0 && provisional[i - 1] != 0 {
                neighbours[k] = provisional[i - 1];
                k += 1;
            }
            if y > 0 {
                let up = i - w;
                if x > 0 && provisional[up - 1] != 0 {
                    neighbours[k] = provisional[up - 1];
                    k += 1;
                }
                if provisional[up] != 0 {
                    neighbours[k] = provisional[up];
                    k += 1;
                }
                if x + 1 < w && provisional[up + 1] != 0 {
                    neighbours[k] = provisional[up + 1];
                    k += 1;
                }
            }
            if k == 0 {
                let label = parent.len() as u32;
                parent.push(label);
                provisional[i] = label;
            } else {
                let first = neighbours[0];
                provisional[i] = first;
                for &n in &neighbours[1..k] {
                    union(&mut parent, first, n);
                }
            }
        }
    }

    let mut final_label = vec![0u32; parent.len()];
    let mut regions: Vec<Region> = Vec::new();
    for (i, &p) in provisional.iter().enumerate() {
        if p == 0 {
            continue;
        }
        let root = find(&mut parent, p) as usize;
        if final_label[root] == 0 {
            regions.push(Region {
                label: regions.len() as u32 + 1,
                area_px: 0,
                peak: (i % w, i / w),
            });
            final_label[root] = regions.len() as u32;
        }
        let region = &mut regions[final_label[root] as usize - 1];
        region.area_px += 1;
        let (px, py) = region.peak;
        if heatmap.values[i] > heatmap.values[py * w + px] {
            region.peak = (i % w, i / w);
        }
    }
    regions
}

/// Saliency concentration score: `1/log2(n+1) - salient_area/total_area` for `n > 0` regions, else 0; clamped to `[0, 1]`.
pub fn compute_scs(regions: &[Region], total_area: usize) -> f64 {
    if regions.is_empty() {
        return 0.0;
    }
    let n = regions.len() as f64;
    let salient: usize = regions.iter().map(|r| r.area_px).sum();
    debug_assert!(total_area >= 1 && salient <= total_area);
    let raw = 1.0 / (n + 1.0).log2() - salient as f64 / total_area as f64;
    raw.clamp(0.0, 1.0)
}

/// Pixel center `(c, r)` on a `width`×`height` grid in bottom-left-origin normalized screen space.
#[inline]
pub fn pixel_to_screen(c: usize, r: usize, width: usize, height: usize) -> Point {
    Point::new(
        (c as f64 + 0.5) / width as f64,
        1.0 - (r as f64 + 0.5) / height as f64,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub frame_index: u64,
    pub n: usize,
    pub scs: f64,
    pub peaks: Vec<Point>,
    #[serde(default)]
    pub historical_points: Vec<Point>,
}

impl FeatureVector {
    /// Peaks followed by historical points, each with unit weight.
    pub fn saliency_points(&self) -> impl Iterator<Item = Point> + '_ {
        self.peaks.iter().chain(self.historical_points.iter()).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub bin_threshold: u8,
    pub scs_threshold: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            bin_threshold: 128,
            scs_threshold: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Accepted(FeatureVector),
    Rejected { frame_index: u64, n: usize, scs: f64 },
}

impl Selection {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Selection::Accepted(_))
    }

    pub fn scs(&self) -> f64 {
        match self {
            Selection::Accepted(v) => v.scs,
            Selection::Rejected { scs, .. } => *scs,
        }
    }

    pub fn region_count(&self) -> usize {
        match self {
            Selection::Accepted(v) => v.n,
            Selection::Rejected { n, .. } => *n,
        }
    }

    pub fn into_vector(self) -> Option<FeatureVector> {
        match self {
            Selection::Accepted(v) => Some(v),
            Selection::Rejected { .. } => None,
        }
    }
}

pub fn extract_feature_vector(heatmap: &SaliencyHeatmap, params: SelectionParams, frame_index: u64) -> Selection {
    let mask = binarize(heatmap, params.bin_threshold);
    let regions = connected_components(&mask, heatmap);
    let scs = compute_scs(&regions, heatmap.total_area());
    if regions.is_empty() || scs < params.scs_threshold {
        return Selection::Rejected {
            frame_index,
            n: regions.len(),
            scs,
        };
    }
    let peaks = regions
        .iter()
        .map(|r| pixel_to_screen(r.peak.0, r.peak.1, heatmap.width, heatmap.height))
        .collect();
    Selection::Accepted(FeatureVector {
        frame_index,
        n: regions.len(),
        scs,
        peaks,
        historical_points: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hm(w: usize, h: usize, values: Vec<u8>) -> SaliencyHeatmap {
        SaliencyHeatmap::from_values(w, h, values, HeatmapSource::BottomUp).unwrap()
    }

    fn region(area: usize) -> Region {
        Region {
            label: 1,
            area_px: area,
            peak: (0, 0),
        }
    }

    #[test]
    fn normalize_examples() {
        let h = normalize_heatmap(&[0.0, 0.5, 1.0], 3, 1, HeatmapSource::BottomUp).unwrap();
        assert_eq!(h.values, vec![0, 128, 255]);
        let h = normalize_heatmap(&[3.7; 6], 3, 2, HeatmapSource::BottomUp).unwrap();
        assert_eq!(h.values, vec![0; 6]);
        let h = normalize_heatmap(&[-2.0, 0.0, 2.0], 3, 1, HeatmapSource::BottomUp).unwrap();
        assert_eq!(h.values, vec![0, 128, 255]);
    }

    #[test]
    fn normalize_rejects_non_finite_and_empty() {
        assert!(normalize_heatmap(&[0.0, f64::NAN], 2, 1, HeatmapSource::BottomUp).is_err());
        assert!(normalize_heatmap(&[0.0, f64::INFINITY], 2, 1, HeatmapSource::BottomUp).is_err());
        assert!(normalize_heatmap(&[], 0, 0, HeatmapSource::BottomUp).is_err());
    }

    #[test]
    fn binarize_boundary() {
        let m = binarize(&hm(4, 1, vec![0, 127, 128, 255]), 128);
        assert_eq!(m.bits, vec![false, false, true, true]);
        let m = binarize(&hm(4, 1, vec![0, 127, 128, 255]), 0);
        assert!(m.bits.iter().all(|&b| b));
        let m = binarize(&hm(4, 1, vec![0; 4]), 128);
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn diagonal_pixels_join() {
        let h = hm(2, 2, vec![200, 0, 0, 250]);
        let regions = connected_components(&binarize(&h, 128), &h);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].area_px, 2);
        assert_eq!(regions[0].peak, (1, 1));
    }

    #[test]
    fn zero_row_separates() {
        let h = hm(1, 3, vec![200, 0, 200]);
        let regions = connected_components(&binarize(&h, 128), &h);
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0].label, 1);
        assert_eq!(regions[1].label, 2);
    }

    #[test]
    fn u_shape_merges_into_one_label() {
        #[rustfmt::skip]
        let v = vec![
            255, 0, 255,
            255, 0, 255,
            255, 255, 255,
        ];
        let h = hm(3, 3, v);
        let regions = connected_components(&binarize(&h, 128), &h);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].area_px, 7);
        // ties at 255 resolve to smallest row-major index
        assert_eq!(regions[0].peak, (0, 0));
    }

    #[test]
    fn empty_mask_no_regions() {
        let h = hm(3, 3, vec![0; 9]);
        assert!(connected_components(&binarize(&h, 128), &h).is_empty());
    }

    #[test]
    fn scs_examples() {
        assert_eq!(compute_scs(&[], 100), 0.0);
        assert!((compute_scs(&[region(10)], 100) - 0.9).abs() < 1e-12);
        let three = [region(20), region(20), region(20)];
        assert_eq!(compute_scs(&three, 100), 0.0);
    }

    #[test]
    fn scs_monotone_in_count_and_area() {
        for n in 1..=20usize {
            for step in 0..=20usize {
                let ratio = step as f64 * 0.05;
                let total = 10_000usize;
                let salient = (ratio * total as f64).round() as usize;
                let mk = |n: usize, salient: usize| -> Vec<Region> {
                    let mut v: Vec<Region> = (0..n).map(|_| region(salient / n)).collect();
                    v[0].area_px += salient - (salient / n) * n;
                    v
                };
                let s = compute_scs(&mk(n, salient), total);
                assert!((0.0..=1.0).contains(&s));
                if n < 20 && salient > n {
                    assert!(compute_scs(&mk(n + 1, salient), total) <= s);
                }
                if step < 20 {
                    let more = ((ratio + 0.05) * total as f64).round() as usize;
                    assert!(compute_scs(&mk(n, more), total) <= s);
                }
            }
        }
    }

    #[test]
    fn top_left_blob_accepted() {
        let mut v = vec![0u8; 68 * 68];
        for (x, y) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            v[y * 68 + x] = 255;
        }
        let sel = extract_feature_vector(&hm(68, 68, v), SelectionParams::default(), 9);
        let fv = sel.into_vector().expect("accepted");
        assert_eq!(fv.frame_index, 9);
        assert_eq!(fv.n, 1);
        assert!((fv.peaks[0].x - 0.02).abs() < 0.02);
        assert!((fv.peaks[0].y - 0.98).abs() < 0.02);
        assert!((fv.peaks[0].x - 0.5 / 68.0).abs() < 1e-12);
        assert!((fv.peaks[0].y - (1.0 - 0.5 / 68.0)).abs() < 1e-12);
    }

    #[test]
    fn blank_rejected() {
        let sel = extract_feature_vector(&hm(68, 68, vec![0; 68 * 68]), SelectionParams::default(), 0);
        assert_eq!(sel, Selection::Rejected { frame_index: 0, n: 0, scs: 0.0 });
    }

    #[test]
    fn sixty_percent_region_rejected() {
        // 6 of 10 rows salient on a 10x10 grid: one region, ratio 0.6
        let v: Vec<u8> = (0..100).map(|i| if i < 60 { 255 } else { 0 }).collect();
        let sel = extract_feature_vector(&hm(10, 10, v), SelectionParams::default(), 0);
        assert!(!sel.is_accepted());
        assert!((sel.scs() - 0.4).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn binarization_invariant_under_positive_affine(
                raw in proptest::collection::vec(-400i32..400, 64),
                log_scale in -6i32..7,
                shift in -1000i32..1000,
                threshold in any::<u8>(),
            ) {
                // dyadic scale and integer shift keep every intermediate exactly representable
                let raw: Vec<f64> = raw.iter().map(|&v| v as f64 / 4.0).collect();
                let scale = 2f64.powi(log_scale);
                let moved: Vec<f64> = raw.iter().map(|v| v * scale + shift as f64).collect();
                let a = normalize_heatmap(&raw, 8, 8, HeatmapSource::BottomUp).unwrap();
                let b = normalize_heatmap(&moved, 8, 8, HeatmapSource::BottomUp).unwrap();
                prop_assert_eq!(binarize(&a, threshold), binarize(&b, threshold));
            }

            #[test]
            fn normalized_extremes(raw in proptest::collection::vec(-1e6f64..1e6, 1..200)) {
                let n = raw.len();
                let h = normalize_heatmap(&raw, n, 1, HeatmapSource::BottomUp).unwrap();
                let constant = raw.iter().all(|&v| v == raw[0]);
                if constant {
                    prop_assert!(h.values.iter().all(|&v| v == 0));
                } else {
                    prop_assert_eq!(*h.values.iter().min().unwrap(), 0);
                    prop_assert_eq!(*h.values.iter().max().unwrap(), 255);
                }
            }

            #[test]
            fn peaks_in_unit_square(values in proptest::collection::vec(any::<u8>(), 1..400), w in 1usize..20) {
                let h = values.len() / w;
                prop_assume!(h >= 1);
                let values = values[..w * h].to_vec();
                let params = SelectionParams { bin_threshold: 128, scs_threshold: 0.0 };
                if let Selection::Accepted(fv) = extract_feature_vector(&hm(w, h, values), params, 0) {
                    prop_assert_eq!(fv.peaks.len(), fv.n);
                    for p in fv.peaks {
                        prop_assert!((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y));
                    }
                }
            }
        }
    }
}
