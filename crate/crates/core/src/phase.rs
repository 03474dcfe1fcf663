//! Phase/depth conversions and wrapping.
//!
//! Colocated illumination means the optical path is twice the depth, so a
//! phase of `2π` corresponds to the unambiguous range `c / (2 f_mod)`.

use std::f64::consts::{PI, TAU};

use crate::config::CameraArrayConfig;
use crate::error::{Error, Result};

/// `d = c φ / (4π f_mod)`. No wrapping is applied.
pub fn phase_to_depth(phase: f64, config: &CameraArrayConfig) -> f64 {
    config.c * phase / (4.0 * PI * config.f_mod)
}

/// `φ = 4π f_mod d / c`, not wrapped.
pub fn depth_to_phase(depth: f64, config: &CameraArrayConfig) -> Result<f64> {
    if depth < 0.0 {
        return Err(Error::NegativeDepth(depth));
    }
    Ok(4.0 * PI * config.f_mod * depth / config.c)
}

/// Reduces a phase into `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Reduces a depth into `[0, range)`.
pub fn wrap_depth(depth: f64, range: f64) -> f64 {
    let w = depth.rem_euclid(range);
    if w >= range {
        0.0
    } else {
        w
    }
}
