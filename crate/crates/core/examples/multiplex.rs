//! Multiplexes a 3x3 depth field onto one sensor through a random binary
//! code and recovers it, with and without sensor noise.

use std::f64::consts::TAU;

use depthfield::multiplex::{forward_multiplex, invert_multiplex, GeneratorOptions, ModulationMatrix};
use depthfield::{render_ground_truth, scenes, CameraArrayConfig, DepthField, NoiseModel};

fn phase_rms(a: &DepthField, b: &DepthField) -> f64 {
    let (mut sum, mut n) = (0.0, 0);
    for (i, ok) in a.valid.indexed_iter() {
        if *ok && b.valid[i] {
            let d = (a.phase[i] - b.phase[i]).rem_euclid(TAU);
            sum += d.min(TAU - d).powi(2);
            n += 1;
        }
    }
    (sum / n as f64).sqrt()
}

fn main() -> depthfield::Result<()> {
    let cfg = CameraArrayConfig { nu: 3, nv: 3, ..Default::default() };
    let field = render_ground_truth(&scenes::two_planes(1.0, 3.0), &cfg)?.field;
    let opts = GeneratorOptions { seed: 4, max_condition: Some(50.0), row_normalize: true };
    let m = ModulationMatrix::random_binary((3, 3), (1, 1), opts)?;
    println!("matrix condition number {:.1}", m.condition_numbers()[0]);

    let clean = forward_multiplex(&field, &m, NoiseModel::none())?;
    println!("sensor frames {:?}", clean.frames.dim());
    let back = invert_multiplex(&clean, &m, 0.0)?;
    println!("noiseless: phase RMS error {:.2e} rad", phase_rms(&field, &back.field));

    let noisy = forward_multiplex(&field, &m, NoiseModel::gaussian(1e-3, 9)?)?;
    for lambda in [0.0, 1e-3, 1e-2] {
        let back = invert_multiplex(&noisy, &m, lambda)?;
        println!("noise 1e-3, lambda {lambda:<6}: phase RMS error {:.2e} rad", phase_rms(&field, &back.field));
    }
    Ok(())
}
