//! PNG heatmaps of per-pixel values drawn on the pixel lattice.
//!
//! Lattice row `j = 0` is the bottom of the domain, so image rows are
//! flipped. Cells outside the pixel region are drawn white.

use std::path::Path;

use eit_core::pixels::PixelGrid;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{LabError, Result};
use crate::io::write_file;

/// Side of one lattice cell in image pixels.
pub const DEFAULT_SCALE: u32 = 8;
const BACKGROUND: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    /// 8-bit gray, black at the minimum and white at the maximum. A
    /// constant field maps to mid gray.
    Grayscale,
    /// Blue through white to red, symmetric about zero and scaled by
    /// `max |value|`.
    Diverging,
}

impl Palette {
    fn channels(self) -> usize {
        match self {
            Palette::Grayscale => 1,
            Palette::Diverging => 3,
        }
    }

    fn color_type(self) -> ExtendedColorType {
        match self {
            Palette::Grayscale => ExtendedColorType::L8,
            Palette::Diverging => ExtendedColorType::Rgb8,
        }
    }
}

/// Raster of the image before encoding: `width * height * channels` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub palette: Palette,
    pub bytes: Vec<u8>,
}

fn unit_byte(t: f64) -> u8 {
    (255.0 * t.clamp(0.0, 1.0)).round() as u8
}

/// Color bytes of every value under `palette`.
pub fn colorize(values: &[f64], palette: Palette) -> Result<Vec<Vec<u8>>> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(LabError::NonFinite(i));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(match palette {
        Palette::Grayscale => {
            values.iter().map(|&v| vec![if hi > lo { unit_byte((v - lo) / (hi - lo)) } else { 128 }]).collect()
        }
        Palette::Diverging => {
            let peak = lo.abs().max(hi.abs());
            values
                .iter()
                .map(|&v| {
                    let t = if peak > 0.0 { v / peak } else { 0.0 };
                    let fade = unit_byte(1.0 - t.abs());
                    if t < 0.0 {
                        vec![fade, fade, 255]
                    } else {
                        vec![255, fade, fade]
                    }
                })
                .collect()
        }
    })
}

/// Draws `values` (one per pixel) on the lattice, `scale` image pixels per cell.
pub fn rasterize(values: &[f64], grid: &PixelGrid, palette: Palette, scale: u32) -> Result<Raster> {
    if values.len() != grid.n_pixels() {
        return Err(LabError::Config(format!("{} values for {} pixels", values.len(), grid.n_pixels())));
    }
    if scale == 0 {
        return Err(LabError::Config("image scale must be positive".into()));
    }
    let colors = colorize(values, palette)?;
    let ch = palette.channels();
    let s = scale as usize;
    let (nx, ny) = (grid.lattice.nx, grid.lattice.ny);
    let (width, height) = (nx * s, ny * s);
    let background = vec![BACKGROUND; ch];
    let mut bytes = Vec::with_capacity(width * height * ch);
    for row in 0..height {
        let j = ny - 1 - row / s;
        for col in 0..width {
            let color = match grid.owner[grid.lattice.cell_index(col / s, j)] {
                Some(n) => &colors[n],
                None => &background,
            };
            bytes.extend_from_slice(color);
        }
    }
    Ok(Raster { width: width as u32, height: height as u32, palette, bytes })
}

/// PNG encoding of a raster.
pub fn encode_png(raster: &Raster) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&raster.bytes, raster.width, raster.height, raster.palette.color_type())
        .map_err(|e| LabError::Image(e.to_string()))?;
    Ok(out)
}

/// Renders and writes a PNG. Nothing is written if any value is not finite.
pub fn render_heatmap(values: &[f64], grid: &PixelGrid, palette: Palette, scale: u32, path: &Path) -> Result<()> {
    let png = encode_png(&rasterize(values, grid, palette, scale)?)?;
    write_file(path, png)
}
