//! Writes a depth field to a DFZ file and reads back its header and data.

use depthfield::dfz::{read_dfz, read_header, write_dfz, Dfz};
use depthfield::{render_ground_truth, scenes, CameraArrayConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = CameraArrayConfig { nu: 3, nv: 3, nx: 64, ny: 48, ..Default::default() };
    let field = render_ground_truth(&scenes::two_planes(1.0, 3.0), &cfg)?.field;
    let path = std::env::temp_dir().join("depthfield_example.dfz");
    write_dfz(&Dfz::Field(field.clone()), &path)?;

    let header = read_header(&path)?;
    println!("{}", serde_json::to_string_pretty(&header)?);

    let back = read_dfz(&path)?.into_field()?;
    // arrays are stored as f32
    let worst = back.albedo.iter().zip(&field.albedo).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} bytes, {} valid rays, max albedo change {worst:.1e}", std::fs::metadata(&path)?.len(), back.valid_count());
    Ok(())
}
