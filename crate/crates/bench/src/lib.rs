//! Fixtures shared by the benchmarks.

use vgaze_core::sim::texture_frame;
use vgaze_core::Frame;

/// Textured frame with one bright square, at camera resolution.
pub fn scene(seed: u64, width: usize, height: usize) -> Frame {
    let mut f = texture_frame(seed, width, height, 0.0);
    let side = (width.min(height) / 12).max(2);
    let (x0, y0) = (width / 3, height / 2);
    for y in y0..(y0 + side).min(height) {
        for x in x0..(x0 + side).min(width) {
            f.pixels[y * width + x] = 255;
        }
    }
    f
}
