//! Wrap-free depth from view-to-view albedo consistency on a tilted plane.

use depthfield::lightfield::{candidate_shears, depth_from_correspondence};
use depthfield::{render_ground_truth, scenes, CameraArrayConfig};

fn main() -> depthfield::Result<()> {
    let cfg = CameraArrayConfig::default();
    let truth = render_ground_truth(&scenes::ramp(&cfg, 0.5, 6.0), &cfg)?;
    let candidates = candidate_shears(&cfg, 0.4, 7.0, 64)?;
    let corr = depth_from_correspondence(&truth.field, &candidates, 5)?;

    let gt = truth.center_map();
    let mut errors: Vec<f64> = Vec::new();
    for (i, ok) in corr.map.valid.indexed_iter() {
        if *ok && gt.valid[i] {
            errors.push((corr.map.depth[i] - gt.depth[i]).abs() / gt.depth[i]);
        }
    }
    errors.sort_by(f64::total_cmp);
    let low = corr.map.low_confidence.iter().filter(|l| **l).count();
    println!("{} pixels, median relative error {:.3}, 90th percentile {:.3}", errors.len(), errors[errors.len() / 2], errors[errors.len() * 9 / 10]);
    println!("{low} low-confidence pixels");
    for x in (0..cfg.nx).step_by(20) {
        let p = (x, cfg.ny / 2);
        println!("x {x:>3}: truth {:.3} m  correspondence {:.3} m", gt.depth[p], corr.map.depth[p]);
    }
    Ok(())
}
