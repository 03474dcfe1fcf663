//! Scene description: opaque Lambertian primitives with procedural albedo.
//!
//! Scenes are plain JSON:
//!
//! ```json
//! {"objects": [
//!   {"type": "rect", "center": [0.0, 0.0], "size": [2.0, 2.0], "depth": 3.0,
//!    "texture": {"type": "noise", "cell": 0.02, "low": 0.4, "high": 1.0, "seed": 7}},
//!   {"type": "rect", "center": [-0.5, 0.0], "size": [1.0, 2.0], "depth": 1.0,
//!    "texture": {"type": "constant", "value": 0.8},
//!    "cutout": {"type": "leaves", "count": 300, "radius_min": 0.004, "radius_max": 0.012, "seed": 3}},
//!   {"type": "sphere", "center": [0.1, 0.0, 2.0], "radius": 0.2,
//!    "texture": {"type": "checker", "size": 0.05, "low": 0.2, "high": 0.9}}
//! ]}
//! ```
//!
//! Texture coordinates are in meters on the surface: rectangle-local for
//! rectangles, tangent-plane coordinates for planes and arc lengths for
//! spheres.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scene depths must lie strictly inside this range of the array plane.
pub const MAX_DEPTH: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub objects: Vec<Primitive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// Fronto-parallel rectangle at a fixed depth.
    Rect {
        center: [f64; 2],
        size: [f64; 2],
        depth: f64,
        texture: Texture,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutout: Option<Cutout>,
    },
    /// Plane through `point` with `normal`, optionally bounded to
    /// `|s| <= half_extent[0]`, `|t| <= half_extent[1]` in its tangent frame.
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
        texture: Texture,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        half_extent: Option<[f64; 2]>,
    },
    Sphere { center: [f64; 3], radius: f64, texture: Texture },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Texture {
    Constant { value: f64 },
    Checker { size: f64, low: f64, high: f64 },
    /// Linear ramp along texture axis 0 or 1, clamped outside `[0, length]`.
    Gradient { axis: usize, start: f64, end: f64, length: f64 },
    /// Smooth value noise with `octaves` layers, remapped to `[low, high]`.
    Noise {
        cell: f64,
        low: f64,
        high: f64,
        seed: u64,
        #[serde(default = "one")]
        octaves: u32,
    },
    /// Row-major `width x height` texels of side `texel` meters, anchored at
    /// texture coordinate (0, 0); clamped at the borders.
    Raster { width: usize, height: usize, texel: f64, values: Vec<f64> },
}

fn one() -> u32 {
    1
}

/// Holes punched into a rectangle: only the listed shapes are solid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Cutout {
    /// Random disks ("leaves") scattered uniformly over the rectangle.
    Leaves { count: usize, radius_min: f64, radius_max: f64, seed: u64 },
    /// Vertical bars of `width` repeating every `period` meters.
    Bars { width: f64, period: f64 },
}

impl Scene {
    pub fn new(objects: Vec<Primitive>) -> Self {
        Self { objects }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| Error::Scene(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::Scene("scene has no objects".into()));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            obj.validate().map_err(|msg| Error::Scene(format!("object {i}: {msg}")))?;
        }
        Ok(())
    }

    pub(crate) fn compile(&self) -> Result<Vec<Compiled<'_>>> {
        self.validate()?;
        Ok(self.objects.iter().map(Compiled::new).collect())
    }
}

impl Primitive {
    fn validate(&self) -> std::result::Result<(), String> {
        let in_range = |z: f64| z > 0.0 && z < MAX_DEPTH;
        match self {
            Primitive::Rect { size, depth, texture, cutout, .. } => {
                if !in_range(*depth) {
                    return Err(format!("depth {depth} outside (0, {MAX_DEPTH})"));
                }
                if !(size[0] > 0.0 && size[1] > 0.0) {
                    return Err("rectangle size must be positive".into());
                }
                if let Some(c) = cutout {
                    c.validate()?;
                }
                texture.validate()
            }
            Primitive::Plane { normal, texture, half_extent, .. } => {
                if norm(*normal) == 0.0 {
                    return Err("plane normal is zero".into());
                }
                if let Some(h) = half_extent {
                    if !(h[0] > 0.0 && h[1] > 0.0) {
                        return Err("half_extent must be positive".into());
                    }
                }
                texture.validate()
            }
            Primitive::Sphere { center, radius, texture } => {
                if !(*radius > 0.0) {
                    return Err("sphere radius must be positive".into());
                }
                if !in_range(center[2] - radius) || !in_range(center[2] + radius) {
                    return Err(format!("sphere depth span outside (0, {MAX_DEPTH})"));
                }
                texture.validate()
            }
        }
    }
}

impl Texture {
    fn validate(&self) -> std::result::Result<(), String> {
        let nonneg = |v: f64, what: &str| if v >= 0.0 { Ok(()) } else { Err(format!("{what} albedo must be >= 0")) };
        match self {
            Texture::Constant { value } => nonneg(*value, "constant"),
            Texture::Checker { size, low, high } => {
                if !(*size > 0.0) {
                    return Err("checker size must be positive".into());
                }
                nonneg(*low, "checker")?;
                nonneg(*high, "checker")
            }
            Texture::Gradient { axis, start, end, length } => {
                if *axis > 1 || !(*length > 0.0) {
                    return Err("gradient needs axis 0|1 and positive length".into());
                }
                nonneg(*start, "gradient")?;
                nonneg(*end, "gradient")
            }
            Texture::Noise { cell, low, high, octaves, .. } => {
                if !(*cell > 0.0) || *octaves == 0 {
                    return Err("noise needs positive cell and >= 1 octave".into());
                }
                nonneg(*low, "noise")?;
                nonneg(*high, "noise")
            }
            Texture::Raster { width, height, texel, values } => {
                if *width == 0 || *height == 0 || values.len() != width * height || !(*texel > 0.0) {
                    return Err("raster dimensions do not match its values".into());
                }
                values.iter().try_for_each(|v| nonneg(*v, "raster"))
            }
        }
    }

    /// Albedo at surface coordinates `(s, t)`.
    pub fn sample(&self, s: f64, t: f64) -> f64 {
        match self {
            Texture::Constant { value } => *value,
            Texture::Checker { size, low, high } => {
                let parity = ((s / size).floor() as i64 + (t / size).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    *low
                } else {
                    *high
                }
            }
            Texture::Gradient { axis, start, end, length } => {
                let c = if *axis == 0 { s } else { t };
                let f = (c / length).clamp(0.0, 1.0);
                start + (end - start) * f
            }
            Texture::Noise { cell, low, high, seed, octaves } => {
                let mut total = 0.0;
                let mut weight = 0.0;
                let mut amp = 1.0;
                let mut scale = 1.0 / cell;
                for o in 0..*octaves {
                    total += amp * value_noise(s * scale, t * scale, seed.wrapping_add(o as u64 * 0x9E37_79B9));
                    weight += amp;
                    amp *= 0.5;
                    scale *= 2.0;
                }
                low + (high - low) * total / weight
            }
            Texture::Raster { width, height, texel, values } => {
                let i = ((s / texel).floor().max(0.0) as usize).min(width - 1);
                let j = ((t / texel).floor().max(0.0) as usize).min(height - 1);
                values[j * width + i]
            }
        }
    }
}

impl Cutout {
    fn validate(&self) -> std::result::Result<(), String> {
        match self {
            Cutout::Leaves { radius_min, radius_max, .. } => {
                if !(*radius_min > 0.0 && radius_max >= radius_min) {
                    return Err("leaf radii must satisfy 0 < min <= max".into());
                }
                Ok(())
            }
            Cutout::Bars { width, period } => {
                if !(*width > 0.0 && period > width) {
                    return Err("bars need 0 < width < period".into());
                }
                Ok(())
            }
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(i: i64, j: i64, seed: u64) -> f64 {
    let h = mix64(seed ^ mix64((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Bilinear value noise with smoothstep fade, in `[0, 1)`.
fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    let (xf, yf) = (x.floor(), y.floor());
    let (i, j) = (xf as i64, yf as i64);
    let fade = |t: f64| t * t * (3.0 - 2.0 * t);
    let (fx, fy) = (fade(x - xf), fade(y - yf));
    let a = lattice(i, j, seed);
    let b = lattice(i + 1, j, seed);
    let c = lattice(i, j + 1, seed);
    let d = lattice(i + 1, j + 1, seed);
    let top = a + (b - a) * fx;
    let bottom = c + (d - c) * fx;
    top + (bottom - top) * fy
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// A ray hit: distance parameter and surface texture coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hit {
    pub t: f64,
    pub s: f64,
    pub tc: f64,
}

/// A primitive with derived data (tangent frames, leaf disks) precomputed.
pub(crate) struct Compiled<'a> {
    prim: &'a Primitive,
    frame: Option<([f64; 3], [f64; 3], [f64; 3])>,
    leaves: Vec<(f64, f64, f64)>,
}

impl<'a> Compiled<'a> {
    fn new(prim: &'a Primitive) -> Self {
        let mut frame = None;
        let mut leaves = Vec::new();
        match prim {
            Primitive::Plane { normal, .. } => {
                let n = normalize(*normal);
                let up = if n[1].abs() < 0.9 { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
                let e1 = normalize(cross(up, n));
                let e2 = cross(n, e1);
                frame = Some((n, e1, e2));
            }
            Primitive::Rect { size, cutout: Some(Cutout::Leaves { count, radius_min, radius_max, seed }), .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                leaves = (0..*count)
                    .map(|_| {
                        let cx = rng.random::<f64>() * size[0];
                        let cy = rng.random::<f64>() * size[1];
                        let r = radius_min + (radius_max - radius_min) * rng.random::<f64>();
                        (cx, cy, r * r)
                    })
                    .collect();
            }
            _ => {}
        }
        Self { prim, frame, leaves }
    }

    pub fn texture(&self) -> &Texture {
        match self.prim {
            Primitive::Rect { texture, .. } | Primitive::Plane { texture, .. } | Primitive::Sphere { texture, .. } => texture,
        }
    }

    /// Nearest intersection with `t` in `(0, MAX_DEPTH)` for a ray whose
    /// direction has unit z component, so `t` equals the hit depth.
    pub fn intersect(&self, origin: [f64; 3], dir: [f64; 3]) -> Option<Hit> {
        let hit = match self.prim {
            Primitive::Rect { center, size, depth, cutout, .. } => {
                let t = (depth - origin[2]) / dir[2];
                let x = origin[0] + t * dir[0];
                let y = origin[1] + t * dir[1];
                let s = x - (center[0] - size[0] / 2.0);
                let tc = y - (center[1] - size[1] / 2.0);
                if !(0.0..=size[0]).contains(&s) || !(0.0..=size[1]).contains(&tc) {
                    return None;
                }
                let solid = match cutout {
                    None => true,
                    Some(Cutout::Leaves { .. }) => self.leaves.iter().any(|&(cx, cy, r2)| {
                        let (dx, dy) = (s - cx, tc - cy);
                        dx * dx + dy * dy <= r2
                    }),
                    Some(Cutout::Bars { width, period }) => s.rem_euclid(*period) < *width,
                };
                if !solid {
                    return None;
                }
                Hit { t, s, tc }
            }
            Primitive::Plane { point, half_extent, .. } => {
                let (n, e1, e2) = self.frame.expect("plane frame");
                let denom = dot(dir, n);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = dot(sub(*point, origin), n) / denom;
                let p = [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
                let rel = sub(p, *point);
                let (s, tc) = (dot(rel, e1), dot(rel, e2));
                if let Some(h) = half_extent {
                    if s.abs() > h[0] || tc.abs() > h[1] {
                        return None;
                    }
                }
                Hit { t, s, tc }
            }
            Primitive::Sphere { center, radius, .. } => {
                let oc = sub(origin, *center);
                let a = dot(dir, dir);
                let b = 2.0 * dot(oc, dir);
                let c = dot(oc, oc) - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t0 = (-b - sq) / (2.0 * a);
                let t1 = (-b + sq) / (2.0 * a);
                let t = if t0 > 0.0 { t0 } else { t1 };
                let p = [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
                let rel = sub(p, *center);
                let s = rel[0].atan2(-rel[2]) * radius;
                let tc = (rel[1] / radius).clamp(-1.0, 1.0).asin() * radius;
                Hit { t, s, tc }
            }
        };
        (hit.t > 0.0 && hit.t < MAX_DEPTH).then_some(hit)
    }
}
