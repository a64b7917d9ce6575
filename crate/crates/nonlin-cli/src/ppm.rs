//! Binary PPM (P6) rendering of basin grids.
//!
//! One pixel per cell. Cells that hit the iteration cap render white, cells
//! whose run diverged render black, converged-but-unmatched cells render
//! grey, and each known root gets its own palette colour whose saturation
//! fades linearly with the iteration count (fast convergence is vivid, slow
//! convergence washes towards white).

use crate::basin::{BasinGrid, STATUS_DIVERGED, STATUS_MAX_ITERS, STATUS_UNMATCHED};
use std::io::Write;

pub const PALETTE: [[u8; 3]; 6] = [
    [215, 48, 39],
    [69, 117, 180],
    [77, 175, 74],
    [255, 165, 0],
    [152, 78, 163],
    [0, 160, 176],
];

fn pixel(status: i32, iters: u32, max_iters: u32) -> [u8; 3] {
    match status {
        STATUS_MAX_ITERS => [255, 255, 255],
        STATUS_DIVERGED => [0, 0, 0],
        STATUS_UNMATCHED => [128, 128, 128],
        k => {
            let base = PALETTE[(k as usize) % PALETTE.len()];
            // Fade towards white as iteration counts approach the cap.
            let t = if max_iters == 0 {
                0.0
            } else {
                (iters.min(max_iters) as f64 / max_iters as f64) * 0.85
            };
            let mut px = [0u8; 3];
            for (out, &b) in px.iter_mut().zip(&base) {
                *out = (b as f64 + (255.0 - b as f64) * t).round() as u8;
            }
            px
        }
    }
}

/// Encodes the grid as a P6 image, bottom row of the domain at the bottom of
/// the image.
pub fn encode_ppm(grid: &BasinGrid, max_iters: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 3 * grid.nx * grid.ny);
    out.extend_from_slice(format!("P6\n{} {}\n255\n", grid.nx, grid.ny).as_bytes());
    for iy in (0..grid.ny).rev() {
        for ix in 0..grid.nx {
            let idx = grid.index(ix, iy);
            out.extend_from_slice(&pixel(grid.status[idx], grid.iters[idx], max_iters));
        }
    }
    out
}

pub fn write_ppm(
    path: &std::path::Path,
    grid: &BasinGrid,
    max_iters: u32,
) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_ppm(grid, max_iters))
}
