//! Canned synthetic scenes used by the demos and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::CameraArrayConfig;
use crate::simulator::{Cutout, Primitive, Scene, Texture};

/// Horizontal half field of view as a tangent, `x / z` at the image edge.
pub fn half_fov_u(config: &CameraArrayConfig) -> f64 {
    0.5 * config.nx as f64 * config.pixel_pitch / config.focal_length
}

pub fn half_fov_v(config: &CameraArrayConfig) -> f64 {
    0.5 * config.ny as f64 * config.pixel_pitch / config.focal_length
}

fn noise(cell: f64, seed: u64) -> Texture {
    Texture::Noise { cell, low: 0.25, high: 1.0, seed, octaves: 2 }
}

/// A textured board at `near` covering the image half with `x < 0` (world
/// coordinates) in front of a textured wall at `far`.
pub fn two_planes(near: f64, far: f64) -> Scene {
    Scene::new(vec![
        Primitive::Rect { center: [-5.0, 0.0], size: [10.0, 20.0], depth: near, texture: noise(0.01, 11), cutout: None },
        Primitive::Rect { center: [0.0, 0.0], size: [40.0, 40.0], depth: far, texture: noise(0.03, 12), cutout: None },
    ])
}

/// A textured board at `near` over the `x < 0` half, in front of a slatted
/// fence at `far` with a wall `gap` meters behind it. Object indices: board
/// 0, fence 1, wall 2.
pub fn fence(near: f64, far: f64, gap: f64) -> Scene {
    Scene::new(vec![
        Primitive::Rect { center: [-5.0, 0.0], size: [10.0, 20.0], depth: near, texture: noise(0.01, 11), cutout: None },
        Primitive::Rect {
            center: [0.0, 0.0],
            size: [40.0, 40.0],
            depth: far,
            texture: noise(0.03, 12),
            cutout: Some(Cutout::Bars { width: 0.08, period: 0.12 }),
        },
        Primitive::Rect { center: [0.0, 0.0], size: [80.0, 80.0], depth: far + gap, texture: noise(0.05, 13), cutout: None },
    ])
}

/// A tilted textured plane whose depth runs from `near` at one image edge to
/// `far` at the other, as seen from the array center.
pub fn ramp(config: &CameraArrayConfig, near: f64, far: f64) -> Scene {
    // z = z0 + g x along the ray x = -m z reaches z0 / (1 + g m)
    let m = half_fov_u(config);
    let g = (far - near) / (m * (far + near));
    let z0 = near * (1.0 + g * m);
    let len = (1.0 + g * g).sqrt();
    Scene::new(vec![Primitive::Plane {
        point: [0.0, 0.0, z0],
        normal: [-g / len, 0.0, 1.0 / len],
        texture: Texture::Noise { cell: 0.02, low: 0.2, high: 1.0, seed: 21, octaves: 2 },
        half_extent: None,
    }])
}

/// A foliage-like screen of random disks at `near` in front of a textured
/// board at `far` that fills the middle of the frame.
pub fn foliage(config: &CameraArrayConfig, near: f64, far: f64, seed: u64) -> Scene {
    let (mu, mv) = (half_fov_u(config), half_fov_v(config));
    let leaf_w = 2.4 * mu * near;
    let leaf_h = 2.4 * mv * near;
    let leaves = (leaf_w * leaf_h / (0.012f64 * 0.012) * 0.35) as usize;
    Scene::new(vec![
        Primitive::Rect {
            center: [0.0, 0.0],
            size: [leaf_w, leaf_h],
            depth: near,
            texture: Texture::Constant { value: 0.9 },
            cutout: Some(Cutout::Leaves { count: leaves, radius_min: 0.004, radius_max: 0.012, seed }),
        },
        Primitive::Rect {
            center: [0.0, 0.0],
            size: [1.3 * mu * far, 1.3 * mv * far],
            depth: far,
            texture: Texture::Checker { size: 0.06, low: 0.35, high: 0.85 },
            cutout: None,
        },
    ])
}

/// A random mix of rectangles, spheres and one backdrop, all inside the
/// unambiguous range of the default modulation frequency.
pub fn random(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = vec![Primitive::Rect {
        center: [0.0, 0.0],
        size: [20.0, 20.0],
        depth: rng.random_range(3.5..4.8),
        texture: Texture::Checker { size: rng.random_range(0.05..0.3), low: 0.2, high: 0.9 },
        cutout: None,
    }];
    for i in 0..rng.random_range(2..6) {
        let depth = rng.random_range(0.8..3.4);
        let texture = match i % 3 {
            0 => Texture::Noise { cell: rng.random_range(0.01..0.05), low: 0.1, high: 1.0, seed: rng.random(), octaves: 2 },
            1 => Texture::Gradient { axis: 0, start: 0.1, end: 1.0, length: 0.5 },
            _ => Texture::Constant { value: rng.random_range(0.05..1.0) },
        };
        let x = rng.random_range(-0.25..0.25) * depth;
        let y = rng.random_range(-0.2..0.2) * depth;
        if rng.random_bool(0.5) {
            let size = [rng.random_range(0.05..0.3) * depth, rng.random_range(0.05..0.3) * depth];
            objects.push(Primitive::Rect { center: [x, y], size, depth, texture, cutout: None });
        } else {
            let radius = rng.random_range(0.03..0.12) * depth;
            objects.push(Primitive::Sphere { center: [x, y, depth], radius, texture });
        }
    }
    Scene::new(objects)
}
