//! Library results checked against small independent computations.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use depthfield::lightfield::shear_field;
use depthfield::multiplex::{forward_multiplex, Generator, ModulationMatrix};
use depthfield::occlusion::kmeans_1d;
use depthfield::simulator::{forward_quadrature, Primitive, Texture};
use depthfield::{
    invert_quadrature, refocus, render_ground_truth, CameraArrayConfig, DepthField, NoiseModel, RefocusMode, Scene, Shear,
};
use nalgebra::DMatrix;
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> CameraArrayConfig {
    CameraArrayConfig { nx: 40, ny: 30, ..Default::default() }
}

fn random_field(cfg: &CameraArrayConfig, seed: u64) -> DepthField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = cfg.shape4();
    let albedo = Array4::from_shape_simple_fn(shape, || rng.random_range(0.05..1.0));
    let phase = Array4::from_shape_simple_fn(shape, || rng.random_range(0.0..TAU));
    DepthField::new(cfg.clone(), albedo, phase, Array4::from_elem(shape, true), true).unwrap()
}

#[test]
fn a_fronto_parallel_plane_shifts_by_the_pinhole_disparity() {
    let cfg = small();
    // depth at which the disparity is two pixels per view step
    let depth = cfg.baseline_u * cfg.focal_length / (2.0 * cfg.pixel_pitch);
    let texture = Texture::Gradient { axis: 0, start: 0.1, end: 1.0, length: 2.0 };
    let scene = Scene::new(vec![Primitive::Rect { center: [0.0, 0.0], size: [20.0, 20.0], depth, texture, cutout: None }]);
    let truth = render_ground_truth(&scene, &cfg).unwrap();
    let a = &truth.field.albedo;
    let mut checked = 0;
    for u in 0..cfg.nu {
        for v in 0..cfg.nv {
            let (du, dv) = (2 * u as isize - 4, 2 * v as isize - 4);
            for x in 4..cfg.nx - 4 {
                for y in 4..cfg.ny - 4 {
                    let (xs, ys) = ((x as isize + du) as usize, (y as isize + dv) as usize);
                    assert!((a[[u, v, xs, ys]] - a[[2, 2, x, y]]).abs() < 1e-9, "view ({u},{v}) pixel ({x},{y})");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 10_000);
    assert!(truth.depth.iter().all(|d| (d - depth).abs() < 1e-9));
}

#[test]
fn demodulation_matches_a_four_point_dft() {
    let cfg = CameraArrayConfig { nu: 2, nv: 2, nx: 9, ny: 7, ..Default::default() };
    let field = random_field(&cfg, 3);
    let stack = forward_quadrature(&field, NoiseModel::none()).unwrap();
    let got = invert_quadrature(&stack, 0.0).unwrap();
    for ((u, v, x, y), a) in got.albedo.indexed_iter() {
        // sum_k i_k exp(-j k π/2) = α exp(jφ)
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..4 {
            let theta = k as f64 * FRAC_PI_2;
            let i = stack.frames[[k, u, v, x, y]];
            re += i * theta.cos();
            im -= i * theta.sin();
        }
        assert!((a - re.hypot(im)).abs() < 1e-12);
        assert!((got.phase[[u, v, x, y]] - im.atan2(re).rem_euclid(TAU)).abs() < 1e-12);
        assert!((a - field.albedo[[u, v, x, y]]).abs() < 1e-12);
    }
}

#[test]
fn forward_multiplex_is_a_blockwise_matrix_product() {
    let (nu, nv, bx, by) = (2, 3, 2, 1);
    let cfg = CameraArrayConfig { nu, nv, nx: 4, ny: 3, ..Default::default() };
    let field = random_field(&cfg, 9);
    let n = nu * nv * bx * by;
    let blocks_y = cfg.ny / by;
    let count = (cfg.nx / bx) * blocks_y;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let blocks: Vec<DMatrix<f64>> = (0..count).map(|_| DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0))).collect();
    let m = ModulationMatrix::new(Generator::User, (nu, nv), (bx, by), blocks.clone()).unwrap();
    let out = forward_multiplex(&field, &m, NoiseModel::none()).unwrap();
    assert_eq!(out.frames.dim(), (4, 1, 1, cfg.nx * nu, cfg.ny * nv));

    for k in 0..4 {
        let offset = k as f64 * FRAC_PI_2;
        for b in 0..count {
            let (x0, y0) = ((b / blocks_y) * bx, (b % blocks_y) * by);
            let mut signal = vec![0.0; n];
            for u in 0..nu {
                for v in 0..nv {
                    for dx in 0..bx {
                        for dy in 0..by {
                            let (x, y) = (x0 + dx, y0 + dy);
                            let d = 0.5 * field.albedo[[u, v, x, y]] * (offset + field.phase[[u, v, x, y]]).cos();
                            signal[(dx * nu + u) * (by * nv) + dy * nv + v] = d;
                        }
                    }
                }
            }
            for r in 0..n {
                let expect: f64 = (0..n).map(|c| blocks[b][(r, c)] * signal[c]).sum();
                let (sx, sy) = (x0 * nu + r / (by * nv), y0 * nv + r % (by * nv));
                assert!((out.frames[[k, 0, 0, sx, sy]] - expect).abs() < 1e-12, "k {k} block {b} row {r}");
            }
        }
    }
}

#[test]
fn multiplexed_frames_scale_with_albedo() {
    let cfg = CameraArrayConfig { nu: 3, nv: 3, nx: 6, ny: 4, ..Default::default() };
    let field = random_field(&cfg, 2);
    let mut doubled = field.clone();
    doubled.albedo.mapv_inplace(|a| 2.0 * a);
    let m = ModulationMatrix::random_gaussian((3, 3), (1, 1), Default::default()).unwrap();
    let a = forward_multiplex(&field, &m, NoiseModel::none()).unwrap();
    let b = forward_multiplex(&doubled, &m, NoiseModel::none()).unwrap();
    for (x, y) in a.frames.iter().zip(&b.frames) {
        assert!((2.0 * x - y).abs() < 1e-12);
    }
}

#[test]
fn phasor_refocus_of_a_plane_straddling_the_seam_keeps_its_phase() {
    let cfg = CameraArrayConfig { nu: 3, nv: 3, nx: 12, ny: 10, ..Default::default() };
    let shape = cfg.shape4();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // phases within ±0.05 rad of zero, wrapped
    let phase = Array4::from_shape_simple_fn(shape, || (rng.random_range(-0.05..0.05f64)).rem_euclid(TAU));
    let field = DepthField::new(cfg.clone(), Array4::from_elem(shape, 1.0), phase.clone(), Array4::from_elem(shape, true), true).unwrap();
    let phasor = refocus(&field, Shear::new(0.0), RefocusMode::Phasor, None).unwrap();
    let naive = refocus(&field, Shear::new(0.0), RefocusMode::Naive, None).unwrap();
    for ((x, y), p) in phasor.phase.indexed_iter() {
        let (s, c) = (0..3).flat_map(|u| (0..3).map(move |v| (u, v))).fold((0.0, 0.0), |(s, c), (u, v)| {
            let p = phase[[u, v, x, y]];
            (s + p.sin(), c + p.cos())
        });
        let expect = s.atan2(c).rem_euclid(TAU);
        let d = (p - expect).rem_euclid(TAU);
        assert!(d.min(TAU - d) < 1e-9);
    }
    // arithmetic averaging across the seam lands far from zero somewhere
    assert!(naive.phase.iter().any(|p| (p - PI).abs() < 2.0));
}

#[test]
fn zero_shear_is_the_identity() {
    let cfg = CameraArrayConfig { nu: 3, nv: 2, nx: 7, ny: 5, ..Default::default() };
    let field = random_field(&cfg, 12);
    let sheared = shear_field(&field, Shear::new(0.0)).unwrap();
    assert_eq!(sheared.valid, field.valid);
    for (a, b) in sheared.albedo.iter().zip(&field.albedo) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn two_cluster_kmeans_finds_the_optimal_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut values: Vec<f64> = (0..300).map(|_| rng.random_range(0.9..1.2)).collect();
    values.extend((0..500).map(|_| rng.random_range(2.7..3.3)));
    let km = kmeans_1d(&values, 2, 1).unwrap();

    // exhaustive search over every split of the sorted values
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let sse = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };
    let cost = |i: usize| sse(&sorted[..i]) + sse(&sorted[i..]);
    let i = (1..sorted.len()).min_by(|a, b| cost(*a).total_cmp(&cost(*b))).unwrap();
    let best = cost(i);
    let means = [sorted[..i].iter().sum::<f64>() / i as f64, sorted[i..].iter().sum::<f64>() / (sorted.len() - i) as f64];
    let last = *km.objective.last().unwrap();
    assert!((last - best).abs() < 1e-6 * best, "{last} vs {best}");
    assert!((km.centroids[0] - means[0]).abs() < 1e-9 && (km.centroids[1] - means[1]).abs() < 1e-9);
}
