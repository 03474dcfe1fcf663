//! Synthetic capture with a virtual array of TOF cameras.
//!
//! Every view carries its own colocated light source, so the optical path of
//! a direct return is twice the hit depth. Only direct illumination is
//! modeled.

mod scene;

pub use scene::{Cutout, Primitive, Scene, Texture, MAX_DEPTH};

use ndarray::{s, Array2, Array4, Array5, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{CameraArrayConfig, PhaseOffsets};
use crate::error::{Error, Result};
use crate::field::{DepthField, DepthMap, QuadratureStack};
use crate::lightfield::{bilinear_taps, Shear};
use crate::phase::depth_to_phase;

/// Additive Gaussian noise on raw correlation samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub gaussian_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { gaussian_sigma: 0.0, seed: 0 }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { gaussian_sigma: sigma, seed })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RenderOptions {
    /// Average albedo over a 2x2 sub-pixel pattern. Depth still comes from
    /// the pixel-center ray.
    pub supersample_albedo: bool,
}

/// Rendered ground truth: the unwrapped depth field plus per-ray depth and
/// the index of the object each ray hit (`-1` for a miss).
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub field: DepthField,
    pub depth: Array4<f64>,
    pub object: Array4<i32>,
}

impl GroundTruth {
    pub fn view_map(&self, u: usize, v: usize) -> DepthMap {
        let depth = self.depth.slice(s![u, v, .., ..]).to_owned();
        let albedo = self.field.albedo.slice(s![u, v, .., ..]).to_owned();
        let valid = self.field.valid.slice(s![u, v, .., ..]).to_owned();
        DepthMap::new(depth, albedo, valid, false, self.field.config.unambiguous_range()).expect("congruent grids")
    }

    pub fn center_map(&self) -> DepthMap {
        let (u, v) = self.field.config.center_view_index();
        self.view_map(u, v)
    }

    pub fn view_objects(&self, u: usize, v: usize) -> Array2<i32> {
        self.object.slice(s![u, v, .., ..]).to_owned()
    }

    /// Center-grid pixels whose sheared samples in every view land, with all
    /// bilinear taps, on `object`. Refocusing at the object's depth averages
    /// only that object's rays there.
    pub fn focus_region(&self, object: i32, s: Shear) -> Result<Array2<bool>> {
        let cfg = &self.field.config;
        s.check(cfg)?;
        let (nu, nv, nx, ny) = cfg.shape4();
        Ok(Array2::from_shape_fn((nx, ny), |(x, y)| {
            (0..nu).all(|u| {
                (0..nv).all(|v| {
                    let (dx, dy) = s.offsets(cfg, u, v);
                    bilinear_taps(x as f64 + dx, y as f64 + dy, nx, ny)
                        .is_some_and(|t| (0..t.n).all(|i| self.object[[u, v, t.idx[i].0, t.idx[i].1]] == object))
                })
            })
        }))
    }
}

/// Ray for pixel `(x, y)` of view `(u, v)`, with unit z direction component.
pub fn pixel_ray(config: &CameraArrayConfig, u: usize, v: usize, x: f64, y: f64) -> ([f64; 3], [f64; 3]) {
    let origin = config.view_position(u, v);
    let xs = (x + 0.5 - config.nx as f64 / 2.0) * config.pixel_pitch;
    let ys = (y + 0.5 - config.ny as f64 / 2.0) * config.pixel_pitch;
    (origin, [-xs / config.focal_length, -ys / config.focal_length, 1.0])
}

/// Pixel coordinates of a world point seen from view `(u, v)`; the inverse of
/// [`pixel_ray`].
pub fn project(config: &CameraArrayConfig, u: usize, v: usize, point: [f64; 3]) -> (f64, f64) {
    let o = config.view_position(u, v);
    let xs = -config.focal_length * (point[0] - o[0]) / point[2];
    let ys = -config.focal_length * (point[1] - o[1]) / point[2];
    (xs / config.pixel_pitch + config.nx as f64 / 2.0 - 0.5, ys / config.pixel_pitch + config.ny as f64 / 2.0 - 0.5)
}

pub fn render_ground_truth(scene: &Scene, config: &CameraArrayConfig) -> Result<GroundTruth> {
    render_ground_truth_with(scene, config, RenderOptions::default())
}

pub fn render_ground_truth_with(scene: &Scene, config: &CameraArrayConfig, opts: RenderOptions) -> Result<GroundTruth> {
    config.validate()?;
    let objects = scene.compile()?;
    let (nu, nv, nx, ny) = config.shape4();

    struct ViewImage {
        albedo: Vec<f64>,
        depth: Vec<f64>,
        object: Vec<i32>,
    }

    let nearest = |origin: [f64; 3], dir: [f64; 3]| {
        let mut best: Option<(usize, scene::Hit)> = None;
        for (i, obj) in objects.iter().enumerate() {
            if let Some(hit) = obj.intersect(origin, dir) {
                if best.as_ref().is_none_or(|(_, b)| hit.t < b.t) {
                    best = Some((i, hit));
                }
            }
        }
        best
    };

    let views: Vec<ViewImage> = (0..nu * nv)
        .into_par_iter()
        .map(|view| {
            let (u, v) = (view / nv, view % nv);
            let mut img = ViewImage { albedo: vec![0.0; nx * ny], depth: vec![0.0; nx * ny], object: vec![-1; nx * ny] };
            for x in 0..nx {
                for y in 0..ny {
                    let (origin, dir) = pixel_ray(config, u, v, x as f64, y as f64);
                    let Some((id, hit)) = nearest(origin, dir) else { continue };
                    let idx = x * ny + y;
                    img.depth[idx] = hit.t;
                    img.object[idx] = id as i32;
                    img.albedo[idx] = if opts.supersample_albedo {
                        let mut sum = 0.0;
                        let mut n = 0;
                        for (dx, dy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                            let (o, d) = pixel_ray(config, u, v, x as f64 + dx, y as f64 + dy);
                            if let Some((j, h)) = nearest(o, d) {
                                sum += objects[j].texture().sample(h.s, h.tc);
                                n += 1;
                            }
                        }
                        sum / n.max(1) as f64
                    } else {
                        objects[id].texture().sample(hit.s, hit.tc)
                    };
                }
            }
            img
        })
        .collect();

    let shape = config.shape4();
    let mut albedo = Array4::zeros(shape);
    let mut depth = Array4::zeros(shape);
    let mut object = Array4::from_elem(shape, -1);
    for (view, img) in views.into_iter().enumerate() {
        let (u, v) = (view / nv, view % nv);
        let as2 = |data: Vec<f64>| Array2::from_shape_vec((nx, ny), data).expect("view size");
        albedo.slice_mut(s![u, v, .., ..]).assign(&as2(img.albedo));
        depth.slice_mut(s![u, v, .., ..]).assign(&as2(img.depth));
        object
            .slice_mut(s![u, v, .., ..])
            .assign(&Array2::from_shape_vec((nx, ny), img.object).expect("view size"));
    }
    let valid = object.mapv(|o| o >= 0);
    let mut phase = Array4::zeros(shape);
    for ((p, &d), &ok) in phase.iter_mut().zip(depth.iter()).zip(valid.iter()) {
        if ok {
            *p = depth_to_phase(d, config)?;
        }
    }
    let field = DepthField::new(config.clone(), albedo, phase, valid, false)?;
    Ok(GroundTruth { field, depth, object })
}

/// Correlation frames `(α/2) cos(offset_k + φ)` plus noise for every ray of
/// `field`. Invalid rays carry zero signal but still receive noise.
///
/// Each `(k, u, v)` plane draws from its own ChaCha stream, so the output
/// does not depend on how the planes are scheduled.
pub fn forward_quadrature(field: &DepthField, noise: NoiseModel) -> Result<QuadratureStack> {
    let (nu, nv, nx, ny) = field.dim();
    let offsets = PhaseOffsets::standard();
    let mut frames = Array5::zeros((4, nu, nv, nx, ny));
    frames
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(k, mut frame_k)| {
            let off = offsets.get(k);
            for u in 0..nu {
                for v in 0..nv {
                    let mut plane = frame_k.slice_mut(s![u, v, .., ..]);
                    let mut rng = (noise.gaussian_sigma > 0.0).then(|| {
                        let mut r = ChaCha8Rng::seed_from_u64(noise.seed);
                        r.set_stream(((k * nu + u) * nv + v) as u64);
                        r
                    });
                    for ((x, y), out) in plane.indexed_iter_mut() {
                        let mut value = 0.0;
                        if field.valid[[u, v, x, y]] {
                            value = 0.5 * field.albedo[[u, v, x, y]] * (off + field.phase[[u, v, x, y]]).cos();
                        }
                        if let Some(rng) = rng.as_mut() {
                            let z: f64 = StandardNormal.sample(rng);
                            value += noise.gaussian_sigma * z;
                        }
                        *out = value;
                    }
                }
            }
        });
    QuadratureStack::new(field.config.clone(), frames)
}

pub fn render_quadrature(scene: &Scene, config: &CameraArrayConfig, noise: NoiseModel) -> Result<QuadratureStack> {
    let truth = render_ground_truth(scene, config)?;
    forward_quadrature(&truth.field, noise)
}
