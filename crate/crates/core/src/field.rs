//! The 4D depth field, raw quadrature stacks and 2D depth maps.

use ndarray::{s, Array2, Array4, Array5, ArrayView2, Zip};

use crate::config::CameraArrayConfig;
use crate::error::{Error, Result};
use crate::phase::{depth_to_phase, phase_to_depth};

/// Per-ray albedo and phase over `(u, v, x, y)`.
///
/// Phase is exactly `0.0` wherever `valid` is false; constructors enforce
/// this so downstream code can rely on it.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthField {
    pub config: CameraArrayConfig,
    pub albedo: Array4<f64>,
    pub phase: Array4<f64>,
    pub valid: Array4<bool>,
    /// Phase lies in `[0, 2π)` because it was recovered from quadrature.
    pub wrapped: bool,
    /// Optional per-ray flag carried by unwrapping and correspondence outputs.
    pub low_confidence: Option<Array4<bool>>,
}

impl DepthField {
    pub fn new(
        config: CameraArrayConfig,
        albedo: Array4<f64>,
        mut phase: Array4<f64>,
        valid: Array4<bool>,
        wrapped: bool,
    ) -> Result<Self> {
        config.validate()?;
        let shape = config.shape4();
        for (name, dim) in [("albedo", albedo.dim()), ("phase", phase.dim()), ("valid", valid.dim())] {
            if dim != shape {
                return Err(Error::Shape(format!("{name} grid is {dim:?}, config says {shape:?}")));
            }
        }
        if let Some(a) = albedo.iter().find(|a| !(**a >= 0.0)) {
            return Err(Error::InvalidArgument(format!("albedo must be non-negative, found {a}")));
        }
        Zip::from(&mut phase).and(&valid).for_each(|p, &ok| {
            if !ok {
                *p = 0.0;
            }
        });
        Ok(Self { config, albedo, phase, valid, wrapped, low_confidence: None })
    }

    /// A field with every ray invalid.
    pub fn empty(config: CameraArrayConfig, wrapped: bool) -> Result<Self> {
        let shape = config.shape4();
        Self::new(config, Array4::zeros(shape), Array4::zeros(shape), Array4::from_elem(shape, false), wrapped)
    }

    pub fn with_low_confidence(mut self, flags: Array4<bool>) -> Result<Self> {
        if flags.dim() != self.config.shape4() {
            return Err(Error::Shape("low-confidence grid does not match field".into()));
        }
        self.low_confidence = Some(flags);
        Ok(self)
    }

    pub fn dim(&self) -> (usize, usize, usize, usize) {
        self.config.shape4()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Per-ray depth in meters; invalid rays read as 0.
    pub fn depth(&self) -> Array4<f64> {
        let cfg = &self.config;
        self.phase.mapv(|p| phase_to_depth(p, cfg))
    }

    /// Clears the wrapped flag. The caller asserts that every depth lies
    /// inside one unambiguous range, so wrapped and true phase coincide.
    pub fn assume_unwrapped(mut self) -> Self {
        self.wrapped = false;
        self
    }

    /// Builds a single-view field from a depth map.
    pub fn from_depth_map(map: &DepthMap, config: &CameraArrayConfig) -> Result<Self> {
        let (nx, ny) = map.depth.dim();
        let cfg = CameraArrayConfig { nu: 1, nv: 1, nx, ny, ..config.clone() };
        let mut phase = Array4::zeros((1, 1, nx, ny));
        for ((x, y), &d) in map.depth.indexed_iter() {
            if map.valid[[x, y]] {
                phase[[0, 0, x, y]] = depth_to_phase(d.max(0.0), &cfg)?;
            }
        }
        let albedo = map.albedo.clone().into_shape_with_order((1, 1, nx, ny)).map_err(shape_err)?;
        let valid = map.valid.clone().into_shape_with_order((1, 1, nx, ny)).map_err(shape_err)?;
        let flags = map.low_confidence.clone().into_shape_with_order((1, 1, nx, ny)).map_err(shape_err)?;
        let field = Self::new(cfg, albedo, phase, valid, map.wrapped)?;
        if flags.iter().any(|f| *f) {
            field.with_low_confidence(flags)
        } else {
            Ok(field)
        }
    }
}

fn shape_err(e: ndarray::ShapeError) -> Error {
    Error::Shape(e.to_string())
}

/// Raw correlation frames `i(k, u, v, x, y)` for the four standard offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureStack {
    pub config: CameraArrayConfig,
    pub frames: Array5<f64>,
}

impl QuadratureStack {
    pub fn new(config: CameraArrayConfig, frames: Array5<f64>) -> Result<Self> {
        config.validate()?;
        let (nu, nv, nx, ny) = config.shape4();
        if frames.dim() != (4, nu, nv, nx, ny) {
            return Err(Error::Shape(format!(
                "quadrature frames are {:?}, expected {:?}",
                frames.dim(),
                (4, nu, nv, nx, ny)
            )));
        }
        Ok(Self { config, frames })
    }

    pub fn zeros(config: CameraArrayConfig) -> Result<Self> {
        let (nu, nv, nx, ny) = config.shape4();
        Self::new(config, Array5::zeros((4, nu, nv, nx, ny)))
    }

    /// One `(nx, ny)` frame for offset `k` and view `(u, v)`.
    pub fn frame(&self, k: usize, u: usize, v: usize) -> ArrayView2<'_, f64> {
        self.frames.slice(s![k, u, v, .., ..])
    }
}

/// A single-view depth image in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub depth: Array2<f64>,
    pub albedo: Array2<f64>,
    pub valid: Array2<bool>,
    pub low_confidence: Array2<bool>,
    /// Depth is known only modulo `unambiguous_range`.
    pub wrapped: bool,
    pub unambiguous_range: f64,
}

impl DepthMap {
    pub fn new(depth: Array2<f64>, albedo: Array2<f64>, valid: Array2<bool>, wrapped: bool, unambiguous_range: f64) -> Result<Self> {
        if depth.dim() != albedo.dim() || depth.dim() != valid.dim() {
            return Err(Error::Shape("depth map grids disagree".into()));
        }
        let low_confidence = Array2::from_elem(depth.dim(), false);
        Ok(Self { depth, albedo, valid, low_confidence, wrapped, unambiguous_range })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.depth.dim()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn congruent(&self, other: &DepthMap) -> bool {
        self.dim() == other.dim()
    }

    /// Root-mean-square error against `truth` over pixels valid in both
    /// and selected by `region` (all pixels when `None`).
    pub fn rmse(&self, truth: &Array2<f64>, region: Option<&Array2<bool>>) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for ((idx, &d), &ok) in self.depth.indexed_iter().zip(self.valid.iter()) {
            if !ok || region.is_some_and(|r| !r[idx]) {
                continue;
            }
            let e = d - truth[idx];
            sum += e * e;
            n += 1;
        }
        (n > 0).then(|| (sum / n as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CameraArrayConfig {
        CameraArrayConfig { nu: 1, nv: 1, nx: 2, ny: 2, ..Default::default() }
    }

    #[test]
    fn invalid_rays_get_zero_phase() {
        let cfg = small();
        let phase = Array4::from_elem((1, 1, 2, 2), 1.5);
        let mut valid = Array4::from_elem((1, 1, 2, 2), true);
        valid[[0, 0, 1, 0]] = false;
        let f = DepthField::new(cfg, Array4::ones((1, 1, 2, 2)), phase, valid, false).unwrap();
        assert_eq!(f.phase[[0, 0, 1, 0]], 0.0);
        assert_eq!(f.phase[[0, 0, 0, 0]], 1.5);
        assert_eq!(f.valid_count(), 3);
    }

    #[test]
    fn rejects_negative_albedo_and_bad_shapes() {
        let cfg = small();
        let bad = Array4::from_elem((1, 1, 2, 2), -0.1);
        assert!(DepthField::new(cfg.clone(), bad, Array4::zeros((1, 1, 2, 2)), Array4::from_elem((1, 1, 2, 2), true), false).is_err());
        assert!(matches!(
            DepthField::new(cfg, Array4::zeros((1, 1, 3, 2)), Array4::zeros((1, 1, 2, 2)), Array4::from_elem((1, 1, 2, 2), true), false),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn quadrature_requires_four_frames() {
        let cfg = small();
        assert!(QuadratureStack::new(cfg.clone(), Array5::zeros((3, 1, 1, 2, 2))).is_err());
        assert!(QuadratureStack::zeros(cfg).is_ok());
    }

    #[test]
    fn depth_map_field_round_trip() {
        let cfg = CameraArrayConfig { c: 3e8, ..small() };
        let depth = ndarray::arr2(&[[1.0, 2.5], [0.0, 4.0]]);
        let mut map = DepthMap::new(depth.clone(), Array2::ones((2, 2)), Array2::from_elem((2, 2), true), false, 5.0).unwrap();
        map.valid[[1, 0]] = false;
        map.low_confidence[[0, 1]] = true;
        let field = DepthField::from_depth_map(&map, &cfg).unwrap();
        let back = field.depth();
        assert!((back[[0, 0, 0, 1]] - 2.5).abs() < 1e-12);
        assert!((back[[0, 0, 1, 1]] - 4.0).abs() < 1e-12);
        assert!(field.low_confidence.unwrap()[[0, 0, 0, 1]]);
    }
}
