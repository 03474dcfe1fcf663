//! Shear-and-average operators on depth fields.
//!
//! A shear resamples view `(u, v)` at `(x + (u - u0) s, y + (v - v0) s_v)`
//! about the (possibly fractional) center view `(u0, v0)`. `s` is the pixel
//! disparity per u step, `s_v` the same focal plane expressed along v
//! (`s * baseline_v / baseline_u`). Averaging the sheared views over
//! `(u, v)` synthesizes a wide-aperture image focused at the depth whose
//! disparity equals `s`.

mod correspondence;

pub use correspondence::{candidate_shears, depth_from_correspondence, CorrespondenceDepth, DEFAULT_CANDIDATES, DEFAULT_WINDOW, LOW_CONFIDENCE_CONTRAST};

use std::f64::consts::TAU;

use ndarray::{Array2, Array4, Axis};
use rayon::prelude::*;

use crate::config::CameraArrayConfig;
use crate::error::{Error, Result};
use crate::field::DepthField;
use crate::phase::{phase_to_depth, wrap_phase};

/// A refocusing shear in pixels of disparity per view step along u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shear {
    pub slope: f64,
}

impl Shear {
    pub fn new(slope: f64) -> Self {
        Self { slope }
    }

    /// The shear that brings a fronto-parallel plane at `depth` into focus.
    pub fn from_depth(depth: f64, config: &CameraArrayConfig) -> Self {
        Self { slope: config.disparity_u(depth) }
    }

    /// Focal depth of this shear; infinite for a zero slope.
    pub fn depth(&self, config: &CameraArrayConfig) -> f64 {
        config.depth_from_disparity_u(self.slope)
    }

    pub fn slope_v(&self, config: &CameraArrayConfig) -> f64 {
        self.slope * config.baseline_v / config.baseline_u
    }

    /// Per-view offsets `(dx, dy)` applied to the sampling position.
    pub(crate) fn offsets(&self, config: &CameraArrayConfig, u: usize, v: usize) -> (f64, f64) {
        let (u0, v0) = config.center_view();
        ((u as f64 - u0) * self.slope, (v as f64 - v0) * self.slope_v(config))
    }

    pub(crate) fn check(&self, config: &CameraArrayConfig) -> Result<()> {
        if !self.slope.is_finite() {
            return Err(Error::InvalidArgument(format!("shear slope must be finite, got {}", self.slope)));
        }
        let (u0, v0) = config.center_view();
        let reach = (self.slope * u0).abs().max((self.slope_v(config) * v0).abs());
        let limit = config.nx.min(config.ny) as f64;
        if reach >= limit {
            return Err(Error::InvalidArgument(format!("shear moves views by {reach:.1} px, image is only {limit} px")));
        }
        Ok(())
    }
}

/// Up to four bilinear taps with positive weight.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub idx: [(usize, usize); 4],
    pub w: [f64; 4],
    pub n: usize,
}

/// Bilinear taps for position `(x, y)`; `None` when a tap with positive
/// weight falls outside the `nx x ny` grid.
pub(crate) fn bilinear_taps(x: f64, y: f64, nx: usize, ny: usize) -> Option<Taps> {
    let axis = |p: f64, n: usize| -> Option<([usize; 2], [f64; 2], usize)> {
        let f = p.floor();
        if f < 0.0 || f >= n as f64 {
            return None;
        }
        let i = f as usize;
        let frac = p - f;
        if frac == 0.0 {
            Some(([i, i], [1.0, 0.0], 1))
        } else if i + 1 < n {
            Some(([i, i + 1], [1.0 - frac, frac], 2))
        } else {
            None
        }
    };
    let (xi, xw, xn) = axis(x, nx)?;
    let (yi, yw, yn) = axis(y, ny)?;
    let mut taps = Taps { idx: [(0, 0); 4], w: [0.0; 4], n: 0 };
    for a in 0..xn {
        for b in 0..yn {
            taps.idx[taps.n] = (xi[a], yi[b]);
            taps.w[taps.n] = xw[a] * yw[b];
            taps.n += 1;
        }
    }
    Some(taps)
}

/// Resamples every view of `field` by the shear `s`.
///
/// Albedo is interpolated bilinearly. Phase is interpolated linearly when
/// unwrapped and on the unit circle when wrapped, so the `0/2π` seam does not
/// produce spurious mid-range phases. A tap touching an invalid ray, or
/// falling outside the image, invalidates the output sample.
pub fn shear_field(field: &DepthField, s: Shear) -> Result<DepthField> {
    let cfg = &field.config;
    s.check(cfg)?;
    let (_, nv, nx, ny) = field.dim();
    let shape = field.dim();
    let mut albedo = Array4::zeros(shape);
    let mut phase = Array4::zeros(shape);
    let mut valid = Array4::from_elem(shape, false);

    albedo
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(phase.axis_iter_mut(Axis(0)).into_par_iter())
        .zip(valid.axis_iter_mut(Axis(0)).into_par_iter())
        .enumerate()
        .for_each(|(u, ((mut a_u, mut p_u), mut ok_u))| {
            for v in 0..nv {
                let (dx, dy) = s.offsets(cfg, u, v);
                for x in 0..nx {
                    for y in 0..ny {
                        let Some(t) = bilinear_taps(x as f64 + dx, y as f64 + dy, nx, ny) else { continue };
                        if (0..t.n).any(|i| !field.valid[[u, v, t.idx[i].0, t.idx[i].1]]) {
                            continue;
                        }
                        let at = |g: &Array4<f64>, i: usize| g[[u, v, t.idx[i].0, t.idx[i].1]];
                        let (a, p) = if t.n == 1 {
                            (at(&field.albedo, 0), at(&field.phase, 0))
                        } else {
                            let a = (0..t.n).map(|i| t.w[i] * at(&field.albedo, i)).sum();
                            let p = if field.wrapped {
                                let (re, im) = (0..t.n).fold((0.0, 0.0), |(re, im), i| {
                                    let ph = at(&field.phase, i);
                                    (re + t.w[i] * ph.cos(), im + t.w[i] * ph.sin())
                                });
                                wrap_phase(im.atan2(re))
                            } else {
                                (0..t.n).map(|i| t.w[i] * at(&field.phase, i)).sum()
                            };
                            (a, p)
                        };
                        a_u[[v, x, y]] = a;
                        p_u[[v, x, y]] = p;
                        ok_u[[v, x, y]] = true;
                    }
                }
            }
        });
    let mut out = DepthField::new(cfg.clone(), albedo, phase, valid, field.wrapped)?;
    if let Some(flags) = &field.low_confidence {
        out.low_confidence = Some(shear_mask(flags, cfg, s)?);
    }
    Ok(out)
}

/// Shears a per-ray boolean mask. A sheared sample is set when any of its
/// bilinear taps is set, so a masked ray cannot leak into an interpolated
/// neighbor. Samples outside the image read as `false`.
pub fn shear_mask(mask: &Array4<bool>, config: &CameraArrayConfig, s: Shear) -> Result<Array4<bool>> {
    if mask.dim() != config.shape4() {
        return Err(Error::Shape("mask does not match field".into()));
    }
    s.check(config)?;
    let (_, _, nx, ny) = config.shape4();
    Ok(Array4::from_shape_fn(mask.dim(), |(u, v, x, y)| {
        let (dx, dy) = s.offsets(config, u, v);
        bilinear_taps(x as f64 + dx, y as f64 + dy, nx, ny).is_some_and(|t| (0..t.n).any(|i| mask[[u, v, t.idx[i].0, t.idx[i].1]]))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefocusMode {
    /// Average the complex phasors `α e^{iφ}`; equivalent to refocusing the
    /// raw quadrature frames and demodulating.
    #[default]
    Phasor,
    /// Average albedo and phase separately.
    Naive,
}

impl std::str::FromStr for RefocusMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phasor" => Ok(Self::Phasor),
            "naive" => Ok(Self::Naive),
            other => Err(Error::InvalidArgument(format!("unknown refocus mode {other:?}"))),
        }
    }
}

/// A synthetic-aperture image on the center-view pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Refocused {
    pub albedo: Array2<f64>,
    pub phase: Array2<f64>,
    pub depth: Array2<f64>,
    pub valid: Array2<bool>,
    /// Number of rays averaged into each pixel.
    pub rays: Array2<u32>,
    /// Pixels where every ray was invalid or masked.
    pub empty_pixels: usize,
    pub wrapped: bool,
}

/// Shears `field` by `s` and averages each pixel over all views whose sheared
/// ray is valid and not excluded by `mask` (`true` = drop the ray). The mask
/// lives in unsheared ray coordinates; see [`shear_mask`].
pub fn refocus(field: &DepthField, s: Shear, mode: RefocusMode, mask: Option<&Array4<bool>>) -> Result<Refocused> {
    let cfg = &field.config;
    let sheared = shear_field(field, s)?;
    let excluded = mask.map(|m| shear_mask(m, cfg, s)).transpose()?;
    let (nu, nv, nx, ny) = field.dim();

    let rows: Vec<Vec<(f64, f64, u32)>> = (0..nx)
        .into_par_iter()
        .map(|x| {
            (0..ny)
                .map(|y| {
                    let mut count = 0u32;
                    let mut sum_a = 0.0;
                    let mut sum_p = 0.0;
                    let mut re = 0.0;
                    let mut im = 0.0;
                    let mut reference = None;
                    for u in 0..nu {
                        for v in 0..nv {
                            if !sheared.valid[[u, v, x, y]] || excluded.as_ref().is_some_and(|m| m[[u, v, x, y]]) {
                                continue;
                            }
                            let a = sheared.albedo[[u, v, x, y]];
                            let p = sheared.phase[[u, v, x, y]];
                            count += 1;
                            match mode {
                                RefocusMode::Naive => {
                                    sum_a += a;
                                    sum_p += p;
                                }
                                RefocusMode::Phasor => {
                                    let r = *reference.get_or_insert(p);
                                    re += a * (p - r).cos();
                                    im += a * (p - r).sin();
                                }
                            }
                        }
                    }
                    if count == 0 {
                        return (0.0, 0.0, 0);
                    }
                    let n = count as f64;
                    match mode {
                        RefocusMode::Naive => (sum_a / n, sum_p / n, count),
                        RefocusMode::Phasor => {
                            let (re, im) = (re / n, im / n);
                            let p = reference.unwrap_or(0.0) + im.atan2(re);
                            (re.hypot(im), p, count)
                        }
                    }
                })
                .collect()
        })
        .collect();

    let mut albedo = Array2::zeros((nx, ny));
    let mut phase = Array2::zeros((nx, ny));
    let mut depth = Array2::zeros((nx, ny));
    let mut rays = Array2::zeros((nx, ny));
    for (x, row) in rows.into_iter().enumerate() {
        for (y, (a, p, c)) in row.into_iter().enumerate() {
            let p = if field.wrapped && c > 0 { wrap_phase(p) } else { p };
            albedo[[x, y]] = a;
            phase[[x, y]] = p;
            depth[[x, y]] = phase_to_depth(p, cfg);
            rays[[x, y]] = c;
        }
    }
    let valid = rays.mapv(|c| c > 0);
    let empty_pixels = valid.iter().filter(|v| !**v).count();
    Ok(Refocused { albedo, phase, depth, valid, rays, empty_pixels, wrapped: field.wrapped })
}

/// Smallest angular distance between two phases.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(nu: usize) -> CameraArrayConfig {
        CameraArrayConfig { nu, nv: nu, nx: 24, ny: 20, c: 3e8, ..Default::default() }
    }

    fn constant(nu: usize, a: f64, p: f64, wrapped: bool) -> DepthField {
        let c = cfg(nu);
        let shape = c.shape4();
        DepthField::new(c, Array4::from_elem(shape, a), Array4::from_elem(shape, p), Array4::from_elem(shape, true), wrapped).unwrap()
    }

    fn random(nu: usize, seed: u64) -> DepthField {
        let c = cfg(nu);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = c.shape4();
        let albedo = Array4::from_shape_simple_fn(shape, || rng.random_range(0.1..1.0));
        let phase = Array4::from_shape_simple_fn(shape, || rng.random_range(0.0..TAU));
        DepthField::new(c, albedo, phase, Array4::from_elem(shape, true), true).unwrap()
    }

    #[test]
    fn zero_shear_is_identity() {
        let f = random(3, 1);
        let s = shear_field(&f, Shear::new(0.0)).unwrap();
        assert_eq!(s, f);
    }

    #[test]
    fn constant_field_stays_constant_inside() {
        let f = constant(5, 0.7, 2.0, false);
        let s = shear_field(&f, Shear::new(1.37)).unwrap();
        let mut interior = 0;
        for ((a, p), ok) in s.albedo.iter().zip(s.phase.iter()).zip(s.valid.iter()) {
            if *ok {
                interior += 1;
                assert!((a - 0.7).abs() < 1e-12 && (p - 2.0).abs() < 1e-12);
            }
        }
        assert!(interior > 0);
        // the center view never moves
        assert!(s.valid.index_axis(Axis(0), 2).index_axis(Axis(0), 2).iter().all(|v| *v));
    }

    #[test]
    fn wrapped_phase_interpolates_across_seam() {
        let c = CameraArrayConfig { nu: 2, nv: 1, nx: 2, ny: 1, ..Default::default() };
        let phase = ndarray::arr1(&[0.1, TAU - 0.1, 0.1, TAU - 0.1]).into_shape_with_order((2, 1, 2, 1)).unwrap();
        let f = DepthField::new(c, Array4::ones((2, 1, 2, 1)), phase, Array4::from_elem((2, 1, 2, 1), true), true).unwrap();
        // view 0 shifts by -0.25 px, view 1 by +0.25 px
        let s = shear_field(&f, Shear::new(0.5)).unwrap();
        let p = s.phase[[1, 0, 0, 0]];
        // circular mean of 0.1 and -0.1 with weights 3:1
        let expected = (0.5 * 0.1f64.sin()).atan2(0.1f64.cos());
        assert!(phase_distance(p, expected) < 1e-12, "got {p}");
    }

    #[test]
    fn shear_rejects_oversized_slopes() {
        let f = constant(5, 1.0, 1.0, false);
        assert!(shear_field(&f, Shear::new(10.0)).is_err());
        assert!(shear_field(&f, Shear::new(f64::NAN)).is_err());
    }

    #[test]
    fn shear_inverse_on_constant_interior() {
        let f = constant(5, 0.4, 1.1, false);
        let s = 0.73;
        let back = shear_field(&shear_field(&f, Shear::new(s)).unwrap(), Shear::new(-s)).unwrap();
        for ((a, b), ok) in back.albedo.iter().zip(f.albedo.iter()).zip(back.valid.iter()) {
            if *ok {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_view_refocus_is_identity() {
        let f = random(1, 4);
        for mode in [RefocusMode::Phasor, RefocusMode::Naive] {
            let r = refocus(&f, Shear::new(0.9), mode, None).unwrap();
            for ((x, y), a) in r.albedo.indexed_iter() {
                assert!((a - f.albedo[[0, 0, x, y]]).abs() < 1e-12);
                assert!(phase_distance(r.phase[[x, y]], f.phase[[0, 0, x, y]]) < 1e-12);
            }
            assert_eq!(r.empty_pixels, 0);
        }
    }

    #[test]
    fn constant_refocus_both_modes() {
        let f = constant(3, 0.6, 2.2, true);
        for mode in [RefocusMode::Phasor, RefocusMode::Naive] {
            let r = refocus(&f, Shear::new(0.4), mode, None).unwrap();
            for ((idx, a), ok) in r.albedo.indexed_iter().zip(r.valid.iter()) {
                if *ok {
                    assert!((a - 0.6).abs() < 1e-12);
                    assert!((r.phase[idx] - 2.2).abs() < 1e-12);
                    assert!((r.depth[idx] - phase_to_depth(2.2, &f.config)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phasor_mode_handles_seam_naive_does_not() {
        let c = CameraArrayConfig { nu: 2, nv: 1, nx: 1, ny: 1, ..Default::default() };
        let phase = ndarray::arr1(&[0.05, TAU - 0.05]).into_shape_with_order((2, 1, 1, 1)).unwrap();
        let f = DepthField::new(c, Array4::ones((2, 1, 1, 1)), phase, Array4::from_elem((2, 1, 1, 1), true), true).unwrap();
        let ph = refocus(&f, Shear::new(0.0), RefocusMode::Phasor, None).unwrap();
        assert!(phase_distance(ph.phase[[0, 0]], 0.0) < 1e-12);
        let nv = refocus(&f, Shear::new(0.0), RefocusMode::Naive, None).unwrap();
        assert!((nv.phase[[0, 0]] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn masked_rays_are_dropped_and_fully_masked_pixels_invalid() {
        let f = random(3, 9);
        let mut mask = Array4::from_elem(f.dim(), false);
        for u in 0..3 {
            for v in 0..3 {
                mask[[u, v, 5, 5]] = true;
            }
        }
        let plain = refocus(&f, Shear::new(0.0), RefocusMode::Phasor, None).unwrap();
        let masked = refocus(&f, Shear::new(0.0), RefocusMode::Phasor, Some(&mask)).unwrap();
        assert!(!masked.valid[[5, 5]]);
        assert_eq!(masked.empty_pixels, 1);
        assert_eq!(masked.rays[[5, 6]], 9);
        for ((idx, a), b) in masked.albedo.indexed_iter().zip(plain.albedo.iter()) {
            if idx != (5, 5) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn taps_skip_zero_weights() {
        let t = bilinear_taps(3.0, 4.0, 4, 5).unwrap();
        assert_eq!(t.n, 1);
        assert!(bilinear_taps(3.5, 1.0, 4, 5).is_none());
        assert!(bilinear_taps(-0.1, 1.0, 4, 5).is_none());
        let t = bilinear_taps(1.25, 2.5, 4, 5).unwrap();
        assert_eq!(t.n, 4);
        assert!((t.w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
