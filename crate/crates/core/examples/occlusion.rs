//! Sees through a screen of leaves: cluster ray depths, drop the nearest
//! cluster and refocus on the background.

use depthfield::lightfield::Shear;
use depthfield::occlusion::{cluster_depths, depth_histogram, refocus_without_foreground};
use depthfield::simulator::forward_quadrature;
use depthfield::{invert_quadrature, refocus, render_ground_truth, scenes, CameraArrayConfig, NoiseModel, RefocusMode};

fn main() -> depthfield::Result<()> {
    let cfg = CameraArrayConfig::default();
    let (near, far) = (1.0, 3.0);
    let truth = render_ground_truth(&scenes::foliage(&cfg, near, far, 5), &cfg)?;
    let raw = forward_quadrature(&truth.field, NoiseModel::gaussian(0.005, 3)?)?;
    // rays through gaps in the leaves that miss the board carry only noise
    let field = invert_quadrature(&raw, 0.1)?.assume_unwrapped();

    let hist = depth_histogram(&field, 100, (0.0, cfg.unambiguous_range()))?;
    let peaks: Vec<f64> = hist.peaks(0.05).into_iter().map(|i| hist.bin_center(i)).collect();
    println!("histogram peaks at {peaks:.3?} m");

    let clusters = cluster_depths(&field, 2, 1)?;
    println!("k-means centroids {:.4?} m after {} iterations", clusters.centroids, clusters.iterations);

    let s = Shear::from_depth(far, &cfg);
    let masked = refocus_without_foreground(&field, &clusters, None, s, RefocusMode::Phasor)?;
    let plain = refocus(&field, s, RefocusMode::Phasor, None)?;
    let close = |d: &ndarray::Array2<f64>, v: &ndarray::Array2<bool>| {
        d.iter().zip(v).filter(|(d, v)| **v && (**d - far).abs() < 0.01).count() as f64 / d.len() as f64
    };
    println!("{} foreground rays masked", masked.masked_rays);
    println!(
        "image pixels within 1 cm of the board depth: {:.1}% masked, {:.1}% unmasked",
        100.0 * close(&masked.refocused.depth, &masked.refocused.valid),
        100.0 * close(&plain.depth, &plain.valid)
    );
    Ok(())
}
