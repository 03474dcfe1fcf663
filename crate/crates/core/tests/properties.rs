//! Invariants that hold for arbitrary inputs.

use std::f64::consts::TAU;

use depthfield::dfz::{decode, encode, Dfz};
use depthfield::lightfield::shear_field;
use depthfield::multiplex::{forward_multiplex, invert_multiplex, GeneratorOptions, ModulationMatrix};
use depthfield::occlusion::depth_histogram;
use depthfield::simulator::forward_quadrature;
use depthfield::tof::demodulate;
use depthfield::unwrap::{unwrap_per_pixel, unwrap_with_line, CalibrationLine};
use depthfield::{
    invert_quadrature, phase_to_depth, refocus, wrap_phase, CameraArrayConfig, DepthField, DepthMap, NoiseModel, RefocusMode,
    Shear,
};
use ndarray::{Array2, Array4};
use proptest::prelude::*;

fn circular(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Small random fields with a sprinkling of invalid rays.
fn field(wrapped: bool) -> impl Strategy<Value = DepthField> {
    (1usize..4, 1usize..4, 2usize..7, 2usize..6).prop_flat_map(move |(nu, nv, nx, ny)| {
        let n = nu * nv * nx * ny;
        (
            prop::collection::vec(0.05f64..1.0, n),
            prop::collection::vec(0.0f64..TAU - 1e-9, n),
            prop::collection::vec(prop::bool::weighted(0.9), n),
        )
            .prop_map(move |(a, p, ok)| {
                let cfg = CameraArrayConfig { nu, nv, nx, ny, ..Default::default() };
                let shape = cfg.shape4();
                DepthField::new(
                    cfg,
                    Array4::from_shape_vec(shape, a).unwrap(),
                    Array4::from_shape_vec(shape, p).unwrap(),
                    Array4::from_shape_vec(shape, ok).unwrap(),
                    wrapped,
                )
                .unwrap()
            })
    })
}

fn wrapped_pair() -> impl Strategy<Value = (DepthMap, DepthMap)> {
    (2usize..12, 1usize..6).prop_flat_map(|(nx, ny)| {
        prop::collection::vec(0.2f64..19.0, nx * ny).prop_map(move |d| {
            let range = 5.0;
            let truth = Array2::from_shape_vec((nx, ny), d).unwrap();
            let ones = Array2::from_elem((nx, ny), 1.0);
            let valid = Array2::from_elem((nx, ny), true);
            let wrapped = DepthMap::new(truth.mapv(|d| d.rem_euclid(range)), ones.clone(), valid.clone(), true, range).unwrap();
            let corr = DepthMap::new(truth, ones, valid, false, range).unwrap();
            (wrapped, corr)
        })
    })
}

fn congruent(a: f64, b: f64, range: f64) -> bool {
    let k = (a - b) / range;
    (k - k.round()).abs() < 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_round_trip(alpha in 1e-3f64..10.0, phi in 0.0f64..TAU) {
        let i: [f64; 4] = std::array::from_fn(|k| 0.5 * alpha * (k as f64 * TAU / 4.0 + phi).cos());
        let (a, p) = demodulate(i);
        prop_assert!((a - alpha).abs() < 1e-12 * alpha.max(1.0));
        prop_assert!(circular(p, phi) < 1e-9);
        prop_assert!((0.0..TAU).contains(&p));
    }

    #[test]
    fn wrapped_phase_is_in_range_and_congruent(phi in -1e4f64..1e4) {
        let w = wrap_phase(phi);
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert!(circular(w, phi) < 1e-9);
    }

    #[test]
    fn depth_is_linear_in_phase(phi in 0.0f64..TAU, f in 1e6f64..1e8) {
        let cfg = CameraArrayConfig { f_mod: f, ..Default::default() };
        let d = phase_to_depth(phi, &cfg);
        prop_assert!((d - phi / TAU * cfg.unambiguous_range()).abs() < 1e-9);
    }

    #[test]
    fn inversion_recovers_every_field(f in field(false)) {
        let back = invert_quadrature(&forward_quadrature(&f, NoiseModel::none()).unwrap(), 1e-6).unwrap();
        prop_assert_eq!(&back.valid, &f.valid);
        for (i, ok) in f.valid.indexed_iter() {
            if *ok {
                prop_assert!((back.albedo[i] - f.albedo[i]).abs() < 1e-12);
                prop_assert!(circular(back.phase[i], f.phase[i]) < 1e-9);
            }
        }
    }

    #[test]
    fn zero_shear_leaves_the_field_alone(f in field(true)) {
        let s = shear_field(&f, Shear::new(0.0)).unwrap();
        prop_assert_eq!(&s.valid, &f.valid);
        for (i, ok) in f.valid.indexed_iter() {
            if *ok {
                prop_assert!((s.albedo[i] - f.albedo[i]).abs() < 1e-12);
                prop_assert!(circular(s.phase[i], f.phase[i]) < 1e-9);
            }
        }
    }

    #[test]
    fn an_empty_mask_changes_nothing(f in field(true), slope in -2.0f64..2.0, phasor in any::<bool>()) {
        let mode = if phasor { RefocusMode::Phasor } else { RefocusMode::Naive };
        let none = Array4::from_elem(f.dim(), false);
        let a = refocus(&f, Shear::new(slope), mode, None).unwrap();
        let b = refocus(&f, Shear::new(slope), mode, Some(&none)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn refocused_phase_stays_wrapped(f in field(true), slope in -2.0f64..2.0) {
        let r = refocus(&f, Shear::new(slope), RefocusMode::Phasor, None).unwrap();
        for (i, ok) in r.valid.indexed_iter() {
            if *ok {
                prop_assert!((0.0..TAU).contains(&r.phase[i]));
            } else {
                prop_assert_eq!(r.rays[i], 0);
            }
        }
    }

    #[test]
    fn per_pixel_unwrapping_is_congruent_and_exact_with_true_depth((wrapped, corr) in wrapped_pair()) {
        let out = unwrap_per_pixel(&wrapped, &corr).unwrap();
        for (i, d) in out.map.depth.indexed_iter() {
            prop_assert!(congruent(*d, wrapped.depth[i], 5.0));
            prop_assert!((d - corr.depth[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn line_unwrapping_is_congruent((wrapped, corr) in wrapped_pair(), row in 0usize..6) {
        let (nx, ny) = wrapped.dim();
        let line = CalibrationLine::segment((0, row % ny), (nx - 1, row % ny)).unwrap();
        if let Ok(out) = unwrap_with_line(&wrapped, &corr, &line, 0) {
            for (i, d) in out.map.depth.indexed_iter() {
                prop_assert!(congruent(*d, wrapped.depth[i], 5.0));
                prop_assert!(out.counts[i] >= 0);
            }
        }
    }

    #[test]
    fn pinhole_multiplexing_round_trips(f in field(false)) {
        let m = ModulationMatrix::pinhole((f.config.nu, f.config.nv), (1, 1)).unwrap();
        let back = invert_multiplex(&forward_multiplex(&f, &m, NoiseModel::none()).unwrap(), &m, 0.0).unwrap();
        for (i, ok) in f.valid.indexed_iter() {
            if *ok {
                prop_assert!((back.field.albedo[i] - f.albedo[i]).abs() < 1e-9);
                prop_assert!(circular(back.field.phase[i], f.phase[i]) < 1e-9);
            }
        }
    }

    #[test]
    fn histogram_counts_every_valid_ray_in_range(f in field(false), bins in 1usize..40) {
        let f = DepthField { wrapped: false, ..f };
        prop_assume!(f.valid_count() > 0);
        let h = depth_histogram(&f, bins, (0.0, f.config.unambiguous_range())).unwrap();
        prop_assert_eq!(h.counts.len(), bins);
        prop_assert_eq!(h.counts.iter().sum::<u64>(), f.valid_count() as u64);
    }

    #[test]
    fn dfz_round_trips_f32_exactly(f in field(true)) {
        let f32_field = DepthField::new(
            f.config.clone(),
            f.albedo.mapv(|a| a as f32 as f64),
            f.phase.mapv(|p| p as f32 as f64),
            f.valid.clone(),
            true,
        )
        .unwrap();
        let object = Dfz::Field(f32_field);
        let bytes = encode(&object);
        prop_assert_eq!(decode(&bytes).unwrap(), object);
    }

    #[test]
    fn recovered_amplitude_ignores_phase(alpha in 1e-3f64..10.0, a in 0.0f64..TAU, b in 0.0f64..TAU) {
        let frames = |phi: f64| -> [f64; 4] { std::array::from_fn(|k| 0.5 * alpha * (k as f64 * TAU / 4.0 + phi).cos()) };
        prop_assert!((demodulate(frames(a)).0 - demodulate(frames(b)).0).abs() < 1e-9);
    }

    #[test]
    fn shearing_back_restores_smooth_fields(slope in -1.5f64..1.5, gx in -0.012f64..0.012, gy in -0.012f64..0.012, c in 0.6f64..0.9) {
        // a linear albedo ramp is reproduced exactly by bilinear interpolation
        let cfg = CameraArrayConfig { nu: 3, nv: 3, nx: 24, ny: 20, ..Default::default() };
        let shape = cfg.shape4();
        let albedo = Array4::from_shape_fn(shape, |(_, _, x, y)| c + gx * x as f64 + gy * y as f64);
        let f = DepthField::new(cfg.clone(), albedo, Array4::from_elem(shape, 1.0), Array4::from_elem(shape, true), false).unwrap();
        let back = shear_field(&shear_field(&f, Shear::new(slope)).unwrap(), Shear::new(-slope)).unwrap();
        for (i, ok) in back.valid.indexed_iter() {
            if *ok {
                prop_assert!((back.albedo[i] - f.albedo[i]).abs() < 1e-6);
                prop_assert!((back.phase[i] - 1.0).abs() < 1e-6);
            }
        }
        // interior pixels survive both shears
        prop_assert!(back.valid[[1, 1, cfg.nx / 2, cfg.ny / 2]]);
    }

    #[test]
    fn line_unwrapping_is_exact_with_true_depth_on_smooth_scenes(
        near in 0.3f64..2.0, span in 0.5f64..14.0, tilt in -0.05f64..0.05, nx in 8usize..60, ny in 1usize..6,
    ) {
        let range = 2.5;
        // depth increases along x by under half a range per pixel
        let step = (span / nx as f64).min(0.45 * range);
        let truth = Array2::from_shape_fn((nx, ny), |(x, y)| near + step * x as f64 + tilt * y as f64 + 0.5);
        let ones = Array2::from_elem((nx, ny), 1.0);
        let valid = Array2::from_elem((nx, ny), true);
        let wrapped = DepthMap::new(truth.mapv(|d| d.rem_euclid(range)), ones.clone(), valid.clone(), true, range).unwrap();
        let corr = DepthMap::new(truth.clone(), ones, valid, false, range).unwrap();
        let line = CalibrationLine::segment((0, 0), (nx - 1, 0)).unwrap();
        let out = unwrap_with_line(&wrapped, &corr, &line, 0).unwrap();
        let (lo, hi) = out.report.covered;
        for (i, d) in out.map.depth.indexed_iter() {
            if (lo..=hi).contains(&truth[i]) {
                prop_assert!((d - truth[i]).abs() < 1e-9, "pixel {:?}: {} vs {}", i, d, truth[i]);
            } else {
                // beyond the calibrated depths the count is extrapolated and flagged
                prop_assert!(out.map.low_confidence[i]);
            }
        }
    }

    #[test]
    fn multiplexing_superposes_phasors(a in field(false), b_seed in 0u64..1000, seed in 0u64..1000) {
        let cfg = a.config.clone();
        let shape = cfg.shape4();
        let mut b = a.clone();
        let mut lcg = b_seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (lcg >> 11) as f64 / (1u64 << 53) as f64
        };
        b.albedo = Array4::from_shape_simple_fn(shape, || 0.05 + next());
        b.phase = Array4::from_shape_simple_fn(shape, || TAU * next());
        b.valid = a.valid.clone();
        b.phase.zip_mut_with(&b.valid, |p, ok| if !ok { *p = 0.0 });

        // phasor sum of a and b
        let mut sum = a.clone();
        for (i, ok) in a.valid.indexed_iter() {
            if *ok {
                let re = a.albedo[i] * a.phase[i].cos() + b.albedo[i] * b.phase[i].cos();
                let im = a.albedo[i] * a.phase[i].sin() + b.albedo[i] * b.phase[i].sin();
                sum.albedo[i] = re.hypot(im);
                sum.phase[i] = im.atan2(re).rem_euclid(TAU);
            }
        }
        let m = ModulationMatrix::random_gaussian((cfg.nu, cfg.nv), (1, 1), GeneratorOptions { seed, ..Default::default() }).unwrap();
        let fa = forward_multiplex(&a, &m, NoiseModel::none()).unwrap();
        let fb = forward_multiplex(&b, &m, NoiseModel::none()).unwrap();
        let fs = forward_multiplex(&sum, &m, NoiseModel::none()).unwrap();
        for ((x, y), z) in fa.frames.iter().zip(&fb.frames).zip(&fs.frames) {
            prop_assert!((x + y - z).abs() < 1e-9);
        }
    }

    #[test]
    fn multiplex_and_direct_inversion_agree(f in field(false), seed in 0u64..1000) {
        let (nu, nv) = (f.config.nu, f.config.nv);
        let opts = GeneratorOptions { seed, max_condition: Some(50.0), row_normalize: true };
        let m = ModulationMatrix::random_binary((nu, nv), (1, 1), opts).unwrap();
        let via_mux = invert_multiplex(&forward_multiplex(&f, &m, NoiseModel::none()).unwrap(), &m, 0.0).unwrap().field;
        let direct = invert_quadrature(&forward_quadrature(&f, NoiseModel::none()).unwrap(), 1e-6).unwrap();
        prop_assert_eq!(&via_mux.valid, &direct.valid);
        for (i, ok) in direct.valid.indexed_iter() {
            if *ok {
                prop_assert!((via_mux.albedo[i] - direct.albedo[i]).abs() < 1e-6);
                prop_assert!(circular(via_mux.phase[i], direct.phase[i]) < 1e-6);
            }
        }
    }
}
