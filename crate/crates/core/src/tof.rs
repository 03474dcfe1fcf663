//! Quadrature demodulation of raw correlation frames.

use std::f64::consts::TAU;

use ndarray::{s, Array4, Zip};

use crate::error::{Error, Result};
use crate::field::{DepthField, DepthMap, QuadratureStack};
use crate::phase::{phase_to_depth, wrap_phase};

/// Default validity threshold as a fraction of the stack's peak amplitude.
pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 1e-6;

/// Amplitude and phase of one ray from its four correlation samples.
///
/// With frames `i_k = (α/2) cos(kπ/2 + φ)`, `i_0 - i_2 = α cos φ` and
/// `i_3 - i_1 = α sin φ`. The phase is returned in `[0, 2π)`.
#[inline]
pub fn demodulate(i: [f64; 4]) -> (f64, f64) {
    let sin = i[3] - i[1];
    let cos = i[0] - i[2];
    let amplitude = sin.hypot(cos);
    let mut phase = sin.atan2(cos);
    if phase < 0.0 {
        phase += TAU;
    }
    (amplitude, wrap_phase(phase))
}

/// Recovers `(α, wrapped φ)` for every ray. Rays whose amplitude is not above
/// `threshold * max amplitude` are marked invalid; an all-zero stack yields
/// an entirely invalid field.
pub fn invert_quadrature(stack: &QuadratureStack, threshold: f64) -> Result<DepthField> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("validity threshold must be >= 0, got {threshold}")));
    }
    let shape = stack.config.shape4();
    let mut albedo = Array4::zeros(shape);
    let mut phase = Array4::zeros(shape);
    let f = &stack.frames;
    let (i0, i1, i2, i3) = (f.slice(s![0, .., .., .., ..]), f.slice(s![1, .., .., .., ..]), f.slice(s![2, .., .., .., ..]), f.slice(s![3, .., .., .., ..]));
    Zip::from(&mut albedo)
        .and(&mut phase)
        .and(&i0)
        .and(&i1)
        .and(&i2)
        .and(&i3)
        .par_for_each(|a, p, &a0, &a1, &a2, &a3| {
            let (amp, ph) = demodulate([a0, a1, a2, a3]);
            *a = amp;
            *p = ph;
        });
    let peak = albedo.iter().copied().fold(0.0, f64::max);
    let cutoff = threshold * peak;
    let valid = albedo.mapv(|a| a > 0.0 && a > cutoff);
    Zip::from(&mut albedo).and(&valid).for_each(|a, &ok| {
        if !ok {
            *a = 0.0;
        }
    });
    DepthField::new(stack.config.clone(), albedo, phase, valid, true)
}

/// Depth image of one view. Depths of a wrapped field are modulo the
/// unambiguous range.
pub fn to_depth_map(field: &DepthField, view: (usize, usize)) -> Result<DepthMap> {
    let (nu, nv, _, _) = field.dim();
    let (u, v) = view;
    if u >= nu || v >= nv {
        return Err(Error::InvalidArgument(format!("view ({u}, {v}) outside {nu}x{nv} grid")));
    }
    let cfg = &field.config;
    let depth = field.phase.slice(s![u, v, .., ..]).mapv(|p| phase_to_depth(p, cfg));
    let albedo = field.albedo.slice(s![u, v, .., ..]).to_owned();
    let valid = field.valid.slice(s![u, v, .., ..]).to_owned();
    let mut map = DepthMap::new(depth, albedo, valid, field.wrapped, cfg.unambiguous_range())?;
    if let Some(flags) = &field.low_confidence {
        map.low_confidence = flags.slice(s![u, v, .., ..]).to_owned();
    }
    Ok(map)
}

/// Re-expresses `field` as if captured at `factor` times its modulation
/// frequency: phases scale by `factor` and wrap into `[0, 2π)`.
///
/// This is what dropping one bit of phase resolution on a sensor does at
/// `factor = 2`. Because `factor` is an integer, a wrapped input gives the
/// same result as its unwrapped original.
pub fn simulate_wrapping(field: &DepthField, factor: u32) -> Result<DepthField> {
    if factor < 1 {
        return Err(Error::InvalidArgument("wrapping factor must be >= 1".into()));
    }
    let k = factor as f64;
    let config = field.config.with_f_mod(field.config.f_mod * k);
    let phase = field.phase.mapv(|p| wrap_phase(p * k));
    let mut out = DepthField::new(config, field.albedo.clone(), phase, field.valid.clone(), true)?;
    out.low_confidence = field.low_confidence.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CameraArrayConfig;
    use crate::phase::depth_to_phase;
    use crate::simulator::{forward_quadrature, NoiseModel};
    use ndarray::Array5;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn one_pixel(frames: [f64; 4]) -> QuadratureStack {
        let cfg = CameraArrayConfig { nu: 1, nv: 1, nx: 1, ny: 1, ..Default::default() };
        let f = Array5::from_shape_vec((4, 1, 1, 1, 1), frames.to_vec()).unwrap();
        QuadratureStack::new(cfg, f).unwrap()
    }

    #[test]
    fn inverts_reference_frames() {
        let f = invert_quadrature(&one_pixel([0.5, 0.0, -0.5, 0.0]), DEFAULT_VALIDITY_THRESHOLD).unwrap();
        assert!((f.albedo[[0, 0, 0, 0]] - 1.0).abs() < 1e-15);
        assert!(f.phase[[0, 0, 0, 0]].abs() < 1e-15);
        assert!(f.wrapped);

        let f = invert_quadrature(&one_pixel([0.0, -0.5, 0.0, 0.5]), DEFAULT_VALIDITY_THRESHOLD).unwrap();
        assert!((f.albedo[[0, 0, 0, 0]] - 1.0).abs() < 1e-15);
        assert!((f.phase[[0, 0, 0, 0]] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn all_zero_stack_is_invalid_not_error() {
        let f = invert_quadrature(&one_pixel([0.0; 4]), DEFAULT_VALIDITY_THRESHOLD).unwrap();
        assert_eq!(f.valid_count(), 0);
        assert_eq!(f.phase[[0, 0, 0, 0]], 0.0);
    }

    fn random_field(seed: u64, shape: (usize, usize, usize, usize)) -> DepthField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = CameraArrayConfig { nu: shape.0, nv: shape.1, nx: shape.2, ny: shape.3, ..Default::default() };
        let albedo = Array4::from_shape_simple_fn(shape, || rng.random_range(0.05..1.0));
        let phase = Array4::from_shape_simple_fn(shape, || rng.random_range(0.0..20.0));
        DepthField::new(cfg, albedo, phase, Array4::from_elem(shape, true), false).unwrap()
    }

    fn circular_diff(a: f64, b: f64) -> f64 {
        let d = wrap_phase(a - b);
        d.min(TAU - d)
    }

    #[test]
    fn forward_then_invert_round_trips() {
        let field = random_field(5, (3, 2, 7, 5));
        let q = forward_quadrature(&field, NoiseModel::none()).unwrap();
        let back = invert_quadrature(&q, DEFAULT_VALIDITY_THRESHOLD).unwrap();
        for ((a, b), (p, q)) in back.albedo.iter().zip(field.albedo.iter()).zip(back.phase.iter().zip(field.phase.iter())) {
            assert!((a - b).abs() < 1e-9);
            assert!(circular_diff(*p, *q) < 1e-9);
        }
    }

    #[test]
    fn amplitude_is_phase_independent() {
        for i in 0..64 {
            let phi = i as f64 * 0.1;
            let frames = [0.0, FRAC_PI_2, PI, 1.5 * PI].map(|o| 0.35 * (o + phi).cos());
            let (amp, _) = demodulate(frames);
            assert!((amp - 0.7).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_noise_matches_theory() {
        let alpha = 1.0;
        let sigma = 0.01 * alpha / 2.0;
        let phi = 1.234;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let mut errs = Vec::with_capacity(n);
        for _ in 0..n {
            let frames = [0.0, FRAC_PI_2, PI, 1.5 * PI].map(|o| alpha / 2.0 * (o + phi).cos() + normal.sample(&mut rng));
            let (_, p) = demodulate(frames);
            let mut d = p - phi;
            if d > PI {
                d -= TAU;
            }
            errs.push(d);
        }
        let mean = errs.iter().sum::<f64>() / n as f64;
        let std = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let bound = 3.0 * sigma / alpha * 2f64.sqrt() * 1.1;
        assert!(std <= bound, "std {std} > {bound}");
        // the small-noise prediction is sqrt(2) sigma / alpha
        assert!((std / (2f64.sqrt() * sigma / alpha) - 1.0).abs() < 0.05);
    }

    #[test]
    fn depth_map_examples() {
        let cfg = CameraArrayConfig { nu: 2, nv: 1, nx: 3, ny: 2, c: 3e8, ..Default::default() };
        let mut valid = Array4::from_elem((2, 1, 3, 2), true);
        valid[[1, 0, 2, 1]] = false;
        let field = DepthField::new(cfg, Array4::ones((2, 1, 3, 2)), Array4::from_elem((2, 1, 3, 2), PI), valid, true).unwrap();
        let map = to_depth_map(&field, (0, 0)).unwrap();
        assert!(map.depth.iter().all(|d| *d == 2.5));
        assert!(map.wrapped);
        let map = to_depth_map(&field, (1, 0)).unwrap();
        assert!(!map.valid[[2, 1]]);
        assert!(to_depth_map(&field, (2, 0)).is_err());
        assert!(to_depth_map(&field, (0, 1)).is_err());
    }

    #[test]
    fn wrapping_at_double_frequency() {
        let cfg = CameraArrayConfig { nu: 1, nv: 1, nx: 1, ny: 1, c: 3e8, f_mod: 30e6, ..Default::default() };
        let phi = depth_to_phase(3.0, &cfg).unwrap();
        let field = DepthField::new(cfg, Array4::ones((1, 1, 1, 1)), Array4::from_elem((1, 1, 1, 1), phi), Array4::from_elem((1, 1, 1, 1), true), false).unwrap();
        let w = simulate_wrapping(&field, 2).unwrap();
        assert_eq!(w.config.f_mod, 60e6);
        assert_eq!(w.config.unambiguous_range(), 2.5);
        let d = to_depth_map(&w, (0, 0)).unwrap().depth[[0, 0]];
        assert!((d - 0.5).abs() < 1e-12);

        let same = simulate_wrapping(&field, 1).unwrap();
        assert!((same.phase[[0, 0, 0, 0]] - wrap_phase(phi)).abs() < 1e-15);
        assert!(simulate_wrapping(&field, 0).is_err());

        // a wrapped input wraps to the same place
        let again = simulate_wrapping(&same, 2).unwrap();
        assert!(circular_diff(again.phase[[0, 0, 0, 0]], w.phase[[0, 0, 0, 0]]) < 1e-12);
    }
}
