//! PNG and CSV exports for visual inspection.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// The linear mapping used to quantize an image, stored next to the PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PngSidecar {
    pub width: usize,
    pub height: usize,
    /// Value mapped to gray level 0.
    pub min: f64,
    /// Value mapped to gray level 255.
    pub max: f64,
    pub invalid_pixels: usize,
}

/// Min-max normalization over valid, finite pixels. Invalid pixels are 0.
pub fn to_gray(values: &Array2<f64>, valid: &Array2<bool>) -> (GrayImage, PngSidecar) {
    let (nx, ny) = values.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, ok) in values.iter().zip(valid.iter()) {
        if *ok && v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let span = hi - lo;
    let mut img = GrayImage::new(nx as u32, ny as u32);
    let mut invalid = 0;
    for ((x, y), v) in values.indexed_iter() {
        let level = if valid[[x, y]] && v.is_finite() {
            if span > 0.0 {
                (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        } else {
            invalid += 1;
            0
        };
        img.put_pixel(x as u32, y as u32, Luma([level]));
    }
    (img, PngSidecar { width: nx, height: ny, min: lo, max: hi, invalid_pixels: invalid })
}

/// Writes `path` as an 8-bit PNG and `path` with a `.json` extension as the
/// sidecar. Returns the sidecar path.
pub fn write_png(path: impl AsRef<Path>, values: &Array2<f64>, valid: &Array2<bool>) -> Result<PathBuf> {
    let path = path.as_ref();
    let (img, sidecar) = to_gray(values, valid);
    img.save_with_format(path, image::ImageFormat::Png)?;
    let side = path.with_extension("json");
    fs::write(&side, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(side)
}

/// Long-format CSV: `x,y,value,valid`.
pub fn write_image_csv(path: impl AsRef<Path>, values: &Array2<f64>, valid: &Array2<bool>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "value", "valid"])?;
    for ((x, y), v) in values.indexed_iter() {
        let ok = valid[[x, y]];
        w.write_record([x.to_string(), y.to_string(), v.to_string(), (ok as u8).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer for histograms, scan lines and metrics.
pub fn write_table(path: impl AsRef<Path>, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
