//! Single-shot multiplexed capture and its linear inversion.
//!
//! A multiplexed sensor sees, per correlation offset, a weighted sum of the
//! per-ray signals `D' = (α/2) cos(offset + φ)` that land on it. Inverting the
//! block matrices recovers `D'` for every ray, and the ordinary quadrature
//! inversion then unmixes `(α, φ)`.
//!
//! Larger blocks mix more neighboring pixels; they allow designs with better
//! light efficiency but make each system bigger and usually worse conditioned.

mod matrix;

pub use matrix::{condition_number, Generator, GeneratorOptions, ModulationMatrix};

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array5, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{CameraArrayConfig, PhaseOffsets};
use crate::error::{Error, Result};
use crate::field::{DepthField, QuadratureStack};
use crate::simulator::NoiseModel;
use crate::tof::{invert_quadrature, DEFAULT_VALIDITY_THRESHOLD};

struct Layout {
    bx: usize,
    by: usize,
    blocks_x: usize,
    blocks_y: usize,
}

impl Layout {
    fn new(m: &ModulationMatrix, nx: usize, ny: usize) -> Result<Self> {
        let (bx, by) = m.block;
        if nx % bx != 0 || ny % by != 0 {
            return Err(Error::Shape(format!("{nx}x{ny} pixels do not tile into {bx}x{by} blocks")));
        }
        let l = Layout { bx, by, blocks_x: nx / bx, blocks_y: ny / by };
        if !m.shared() && m.blocks.len() != l.count() {
            return Err(Error::Shape(format!("matrix has {} blocks, field tiles into {}", m.blocks.len(), l.count())));
        }
        Ok(l)
    }

    fn count(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    fn origin(&self, b: usize) -> (usize, usize) {
        ((b / self.blocks_y) * self.bx, (b % self.blocks_y) * self.by)
    }
}

/// Sensor-side configuration: one view at `(nx * nu, ny * nv)` pixels.
pub fn sensor_config(field: &CameraArrayConfig) -> CameraArrayConfig {
    CameraArrayConfig { nu: 1, nv: 1, nx: field.nx * field.nu, ny: field.ny * field.nv, ..field.clone() }
}

/// Field-side configuration recovered from a sensor stack and a matrix.
pub fn field_config(sensor: &CameraArrayConfig, m: &ModulationMatrix) -> Result<CameraArrayConfig> {
    let (nu, nv) = m.views;
    if sensor.nu != 1 || sensor.nv != 1 {
        return Err(Error::Shape(format!("multiplexed stacks have one view, found {}x{}", sensor.nu, sensor.nv)));
    }
    if sensor.nx % nu != 0 || sensor.ny % nv != 0 {
        return Err(Error::Shape(format!("sensor {}x{} is not a multiple of {nu}x{nv} views", sensor.nx, sensor.ny)));
    }
    Ok(CameraArrayConfig { nu, nv, nx: sensor.nx / nu, ny: sensor.ny / nv, ..sensor.clone() })
}

/// Per-ray `D'` frames of `field`, the quantity a multiplexed sensor mixes.
pub fn mixed_signal(field: &DepthField) -> Array5<f64> {
    let (nu, nv, nx, ny) = field.dim();
    let offsets = PhaseOffsets::standard();
    Array5::from_shape_fn((4, nu, nv, nx, ny), |(k, u, v, x, y)| {
        if field.valid[[u, v, x, y]] {
            0.5 * field.albedo[[u, v, x, y]] * (offsets.get(k) + field.phase[[u, v, x, y]]).cos()
        } else {
            0.0
        }
    })
}

/// Multiplexed sensor frames for `field` seen through `m`, plus optional
/// sensor noise (one ChaCha stream per offset).
pub fn forward_multiplex(field: &DepthField, m: &ModulationMatrix, noise: NoiseModel) -> Result<QuadratureStack> {
    let (nu, nv, nx, ny) = field.dim();
    if (nu, nv) != m.views {
        return Err(Error::Shape(format!("field has {nu}x{nv} views, matrix expects {:?}", m.views)));
    }
    let layout = Layout::new(m, nx, ny)?;
    let signal = mixed_signal(field);
    let sensor = sensor_config(&field.config);
    let mut frames = Array5::zeros((4, 1, 1, sensor.nx, sensor.ny));
    frames.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(k, mut out)| {
        let d = signal.index_axis(Axis(0), k);
        let mut plane = out.slice_mut(s![0, 0, .., ..]);
        for b in 0..layout.count() {
            let (x0, y0) = layout.origin(b);
            let mut x = DVector::zeros(m.size());
            for u in 0..nu {
                for v in 0..nv {
                    for dx in 0..layout.bx {
                        for dy in 0..layout.by {
                            x[m.column(u, v, dx, dy)] = d[[u, v, x0 + dx, y0 + dy]];
                        }
                    }
                }
            }
            let y = m.block_matrix(b) * x;
            for (r, value) in y.iter().enumerate() {
                let (ox, oy) = m.sensor_offset(r);
                plane[[x0 * nu + ox, y0 * nv + oy]] = *value;
            }
        }
        if noise.gaussian_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(k as u64);
            for p in plane.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p += noise.gaussian_sigma * z;
            }
        }
    });
    QuadratureStack::new(sensor, frames)
}

/// Regularized inverse `V diag(σ / (σ² + λ)) Uᵀ` and the condition number.
fn regularized_inverse(m: &DMatrix<f64>, lambda: f64, block: usize) -> Result<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if lambda == 0.0 && min <= max * n as f64 * f64::EPSILON {
        return Err(Error::RankDeficient { block, condition });
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let gain = sv.map(|s| if s > 0.0 { s / (s * s + lambda) } else { 0.0 });
    let inv = vt.transpose() * DMatrix::from_diagonal(&gain) * u.transpose();
    Ok((inv, condition))
}

#[derive(Debug, Clone)]
pub struct Demultiplexed {
    /// Recovered `D'` per ray, laid out like a quadrature stack.
    pub mixed: QuadratureStack,
    /// `(α, wrapped φ)` from quadrature inversion of `mixed`.
    pub field: DepthField,
    /// Condition number of each distinct block matrix.
    pub condition: Vec<f64>,
}

/// Solves every block of every offset for `D'` with Tikhonov weight
/// `lambda`, then quadrature-inverts the result.
pub fn invert_multiplex(stack: &QuadratureStack, m: &ModulationMatrix, lambda: f64) -> Result<Demultiplexed> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let cfg = field_config(&stack.config, m)?;
    let (nu, nv, nx, ny) = cfg.shape4();
    let layout = Layout::new(m, nx, ny)?;
    let inverses: Vec<(DMatrix<f64>, f64)> = m
        .blocks
        .par_iter()
        .enumerate()
        .map(|(b, mat)| regularized_inverse(mat, lambda, b))
        .collect::<Result<_>>()?;
    let condition = inverses.iter().map(|(_, c)| *c).collect();

    let mut frames = Array5::zeros((4, nu, nv, nx, ny));
    frames.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(k, mut out)| {
        let sensor = stack.frames.slice(s![k, 0, 0, .., ..]);
        for b in 0..layout.count() {
            let (x0, y0) = layout.origin(b);
            let y = DVector::from_fn(m.size(), |r, _| {
                let (ox, oy) = m.sensor_offset(r);
                sensor[[x0 * nu + ox, y0 * nv + oy]]
            });
            let inv = if m.shared() { &inverses[0].0 } else { &inverses[b].0 };
            let x = inv * y;
            for u in 0..nu {
                for v in 0..nv {
                    for dx in 0..layout.bx {
                        for dy in 0..layout.by {
                            out[[u, v, x0 + dx, y0 + dy]] = x[m.column(u, v, dx, dy)];
                        }
                    }
                }
            }
        }
    });
    let mixed = QuadratureStack::new(cfg, frames)?;
    let field = invert_quadrature(&mixed, DEFAULT_VALIDITY_THRESHOLD)?;
    Ok(Demultiplexed { mixed, field, condition })
}
