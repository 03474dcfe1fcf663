//! Camera array geometry and modulation settings.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The four reference-signal offsets used for quadrature sampling,
/// expressed as the phase `f_mod * tau` in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOffsets([f64; 4]);

impl PhaseOffsets {
    pub const STANDARD: PhaseOffsets = PhaseOffsets([0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]);

    pub fn standard() -> Self {
        Self::STANDARD
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl Default for PhaseOffsets {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// A regular grid of pinhole TOF cameras on the z = 0 plane, all looking
/// down +z.
///
/// View `(iu, iv)` sits at `((iu - u0) * baseline_u, (iv - v0) * baseline_v, 0)`
/// where `(u0, v0)` is the grid center. Each camera uses an inverted
/// (physical) image: a point moving to +x in the world moves to smaller
/// pixel x, so the pixel position of a fixed point grows with the view
/// index by `baseline * focal_length / (depth * pixel_pitch)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraArrayConfig {
    pub nu: usize,
    pub nv: usize,
    pub baseline_u: f64,
    pub baseline_v: f64,
    pub nx: usize,
    pub ny: usize,
    pub focal_length: f64,
    pub pixel_pitch: f64,
    pub f_mod: f64,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

impl Default for CameraArrayConfig {
    /// 5x5 views at one-inch spacing, 160x120 pixels, 30 MHz.
    fn default() -> Self {
        Self {
            nu: 5,
            nv: 5,
            baseline_u: 0.0254,
            baseline_v: 0.0254,
            nx: 160,
            ny: 120,
            focal_length: 0.0125,
            pixel_pitch: 45e-6,
            f_mod: 30e6,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl CameraArrayConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [("nu", self.nu), ("nv", self.nv), ("nx", self.nx), ("ny", self.ny)];
        for (name, n) in dims {
            if n == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        let positive = [
            ("baseline_u", self.baseline_u),
            ("baseline_v", self.baseline_v),
            ("focal_length", self.focal_length),
            ("pixel_pitch", self.pixel_pitch),
            ("f_mod", self.f_mod),
            ("c", self.c),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {value}")));
            }
        }
        Ok(())
    }

    /// Depth period of a single-frequency measurement, `c / (2 f_mod)`.
    pub fn unambiguous_range(&self) -> f64 {
        self.c / (2.0 * self.f_mod)
    }

    pub fn views(&self) -> usize {
        self.nu * self.nv
    }

    pub fn pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn shape4(&self) -> (usize, usize, usize, usize) {
        (self.nu, self.nv, self.nx, self.ny)
    }

    /// Fractional index of the center view along u and v.
    pub fn center_view(&self) -> (f64, f64) {
        ((self.nu as f64 - 1.0) / 2.0, (self.nv as f64 - 1.0) / 2.0)
    }

    /// Integer view closest to the grid center (lower one for even counts).
    pub fn center_view_index(&self) -> (usize, usize) {
        ((self.nu - 1) / 2, (self.nv - 1) / 2)
    }

    /// World-space position of view `(iu, iv)` on the array plane.
    pub fn view_position(&self, iu: usize, iv: usize) -> [f64; 3] {
        let (u0, v0) = self.center_view();
        [(iu as f64 - u0) * self.baseline_u, (iv as f64 - v0) * self.baseline_v, 0.0]
    }

    /// Pixel shift per view step along u for a point at `depth`.
    pub fn disparity_u(&self, depth: f64) -> f64 {
        self.baseline_u * self.focal_length / (depth * self.pixel_pitch)
    }

    /// Pixel shift per view step along v for a point at `depth`.
    pub fn disparity_v(&self, depth: f64) -> f64 {
        self.baseline_v * self.focal_length / (depth * self.pixel_pitch)
    }

    pub fn depth_from_disparity_u(&self, slope: f64) -> f64 {
        self.baseline_u * self.focal_length / (slope * self.pixel_pitch)
    }

    /// Same geometry at a different modulation frequency.
    pub fn with_f_mod(&self, f_mod: f64) -> Self {
        Self { f_mod, ..self.clone() }
    }

    pub fn with_views(&self, nu: usize, nv: usize) -> Self {
        Self { nu, nv, ..self.clone() }
    }

    pub fn with_pixels(&self, nx: usize, ny: usize) -> Self {
        Self { nx, ny, ..self.clone() }
    }
}
