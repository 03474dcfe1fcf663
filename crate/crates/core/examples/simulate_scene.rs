//! Builds a scene by hand, renders it through a 3x3 array and writes the
//! center view's depth and albedo as PNG plus CSV.

use depthfield::export::{write_image_csv, write_png};
use depthfield::simulator::{Primitive, Texture};
use depthfield::{render_ground_truth, CameraArrayConfig, Scene};

fn main() -> depthfield::Result<()> {
    let out = std::env::temp_dir().join("depthfield_simulate_scene");
    std::fs::create_dir_all(&out)?;

    let scene = Scene::new(vec![
        Primitive::Sphere { center: [0.0, 0.0, 1.5], radius: 0.2, texture: Texture::Checker { size: 0.05, low: 0.3, high: 0.9 } },
        Primitive::Rect {
            center: [0.0, 0.0],
            size: [8.0, 8.0],
            depth: 3.0,
            texture: Texture::Noise { cell: 0.04, low: 0.2, high: 1.0, seed: 3, octaves: 2 },
            cutout: None,
        },
    ]);
    // scenes are plain JSON, the same format the CLI reads
    std::fs::write(out.join("scene.json"), serde_json::to_string_pretty(&scene).expect("serializable"))?;

    let cfg = CameraArrayConfig { nu: 3, nv: 3, ..Default::default() };
    let truth = render_ground_truth(&scene, &cfg)?;
    let center = truth.center_map();
    write_png(out.join("depth.png"), &center.depth, &center.valid)?;
    write_png(out.join("albedo.png"), &center.albedo, &center.valid)?;
    write_image_csv(out.join("depth.csv"), &center.depth, &center.valid)?;

    let on_sphere = truth.view_objects(1, 1).iter().filter(|o| **o == 0).count();
    println!("{} of {} center-view pixels see the sphere", on_sphere, cfg.pixels());
    println!("wrote {}", out.display());
    Ok(())
}
