//! Grayscale contact sheets for human review of extreme-score samples.
//!
//! A montage is a binary PGM (`P5`, maxval 255) holding a 5x5 grid of tiles
//! in row-major list order, separated by 2-pixel white gutters. Unused
//! trailing tiles are white.

use std::path::Path;

use crate::error::{Error, Result};

pub const GRID: usize = 5;
pub const GUTTER: usize = 2;
const WHITE: u8 = 255;

/// Renders up to 25 equally sized `rows x cols` images into PGM bytes.
pub fn render_montage(images: &[&[u8]], rows: usize, cols: usize) -> Result<Vec<u8>> {
    if images.is_empty() || images.len() > GRID * GRID {
        return Err(Error::invalid(format!(
            "montage takes 1 to {} images, got {}",
            GRID * GRID,
            images.len()
        )));
    }
    if let Some(bad) = images.iter().position(|img| img.len() != rows * cols) {
        return Err(Error::DimensionMismatch {
            what: "montage tile size",
            expected: rows * cols,
            actual: images[bad].len(),
        });
    }
    let width = GRID * cols + (GRID - 1) * GUTTER;
    let height = GRID * rows + (GRID - 1) * GUTTER;
    let mut canvas = vec![WHITE; width * height];
    for (t, img) in images.iter().enumerate() {
        let (top, left) = ((t / GRID) * (rows + GUTTER), (t % GRID) * (cols + GUTTER));
        for r in 0..rows {
            let dst = (top + r) * width + left;
            canvas[dst..dst + cols].copy_from_slice(&img[r * cols..(r + 1) * cols]);
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&canvas);
    Ok(out)
}

pub fn emit_montage(images: &[&[u8]], rows: usize, cols: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = render_montage(images, rows, cols)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
