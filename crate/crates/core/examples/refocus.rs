//! Synthetic-aperture refocusing of a depth field at two planes, with phasor
//! and naive phase averaging.

use depthfield::lightfield::Shear;
use depthfield::{invert_quadrature, refocus, render_ground_truth, render_quadrature, scenes, CameraArrayConfig, NoiseModel, RefocusMode};

fn main() -> depthfield::Result<()> {
    let cfg = CameraArrayConfig::default();
    let scene = scenes::fence(1.0, 3.0, 0.6);
    let truth = render_ground_truth(&scene, &cfg)?;
    let field = invert_quadrature(&render_quadrature(&scene, &cfg, NoiseModel::none())?, 1e-6)?.assume_unwrapped();

    for (depth, object) in [(1.0, 0), (3.0, 1)] {
        let s = Shear::from_depth(depth, &cfg);
        let region = truth.focus_region(object, s)?;
        for mode in [RefocusMode::Phasor, RefocusMode::Naive] {
            let r = refocus(&field, s, mode, None)?;
            let (mut sum, mut n) = (0.0, 0);
            for (i, inside) in region.indexed_iter() {
                if *inside && r.valid[i] {
                    sum += (r.depth[i] - depth).powi(2);
                    n += 1;
                }
            }
            println!("focus {depth} m ({:.2} px/view) {mode:?}: RMSE {:.2e} m over {n} pixels", s.slope, (sum / n as f64).sqrt());
        }
    }
    Ok(())
}
