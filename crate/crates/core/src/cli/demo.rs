//! `depthfield demo ...`: canned end-to-end runs that write images, tables
//! and a `manifest.json` with the artifacts produced and their metrics.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use ndarray::{s, Array2, Axis};
use serde_json::{json, Map, Value};

use super::{write_refocused, CameraArgs};
use crate::config::CameraArrayConfig;
use crate::error::{Error, Result};
use crate::export::{write_png, write_table};
use crate::field::{DepthField, DepthMap};
use crate::lightfield::{candidate_shears, depth_from_correspondence, refocus, RefocusMode, Refocused, Shear};
use crate::multiplex::{forward_multiplex, invert_multiplex, mixed_signal, GeneratorOptions, ModulationMatrix};
use crate::occlusion::{cluster_depths, depth_histogram, refocus_without_foreground, DEFAULT_BINS};
use crate::scenes;
use crate::simulator::{forward_quadrature, render_ground_truth, GroundTruth, NoiseModel, Scene};
use crate::tof::{invert_quadrature, simulate_wrapping, to_depth_map, DEFAULT_VALIDITY_THRESHOLD};
use crate::unwrap::{unwrap_per_pixel, unwrap_with_line, CalibrationLine, DEFAULT_MEDIAN_RADIUS};

#[derive(Debug, Subcommand)]
pub enum DemoCommand {
    /// Two depth layers refocused in and out of focus.
    Refocus(DemoArgs),
    /// A deep ramp wrapped at twice the modulation frequency, then unwrapped.
    Unwrap(DemoArgs),
    /// Refocusing a board through foliage with and without the foreground.
    Occlusion(DemoArgs),
    /// Multiplexed capture through a random mask and its inversion.
    Multiplex(DemoArgs),
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub camera: CameraArgs,
}

/// Artifacts and metrics collected while a demo runs.
struct Manifest {
    dir: PathBuf,
    artifacts: Vec<String>,
    metrics: Map<String, Value>,
}

impl Manifest {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_owned(), artifacts: Vec::new(), metrics: Map::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn add(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.dir).unwrap_or(path);
        self.artifacts.push(rel.to_string_lossy().into_owned());
    }

    fn png(&mut self, name: &str, values: &Array2<f64>, valid: &Array2<bool>) -> Result<()> {
        let path = self.path(name);
        let sidecar = write_png(&path, values, valid)?;
        self.add(&path);
        self.add(&sidecar);
        Ok(())
    }

    fn table(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let path = self.path(name);
        write_table(&path, columns, rows)?;
        self.add(&path);
        Ok(())
    }

    fn refocused(&mut self, prefix: &str, r: &Refocused) -> Result<()> {
        for p in write_refocused(&self.path(prefix), r)? {
            self.add(&p);
        }
        Ok(())
    }

    fn scene(&mut self, scene: &Scene) -> Result<()> {
        let path = self.path("scene.json");
        std::fs::write(&path, serde_json::to_string_pretty(scene)?)?;
        self.add(&path);
        Ok(())
    }

    fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_owned(), value.into());
    }

    fn finish(mut self, demo: &str, seed: u64, config: &CameraArrayConfig) -> Result<()> {
        self.artifacts.push("manifest.json".into());
        let manifest = json!({
            "demo": demo,
            "seed": seed,
            "config": config,
            "artifacts": self.artifacts,
            "metrics": self.metrics,
        });
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.path("manifest.json"), &text)?;
        println!("{text}");
        Ok(())
    }
}

pub fn run(cmd: DemoCommand) -> Result<()> {
    match cmd {
        DemoCommand::Refocus(a) => refocus_demo(&a),
        DemoCommand::Unwrap(a) => unwrap_demo(&a),
        DemoCommand::Occlusion(a) => occlusion_demo(&a),
        DemoCommand::Multiplex(a) => multiplex_demo(&a),
    }
}

/// Root-mean-square of `values - truth` over `region`, counting invalid
/// region pixels as errors of `penalty`.
fn region_rmse(values: &Array2<f64>, valid: &Array2<bool>, truth: &Array2<f64>, region: &Array2<bool>, penalty: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((i, r), t) in region.indexed_iter().zip(truth.iter()) {
        if *r {
            let e = if valid[i] { values[i] - t } else { penalty };
            sum += e * e;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn fraction_within(r: &Refocused, truth: &Array2<f64>, region: &Array2<bool>, tol: f64) -> f64 {
    let total = region.iter().filter(|v| **v).count();
    let good = region.indexed_iter().filter(|(i, v)| **v && r.valid[*i] && (r.depth[*i] - truth[*i]).abs() < tol).count();
    good as f64 / total.max(1) as f64
}

/// Ground-truth depths lie inside one unambiguous range.
fn fits_range(truth: &GroundTruth) -> bool {
    let range = truth.field.config.unambiguous_range();
    truth.depth.iter().all(|d| *d < range)
}

fn capture(truth: &GroundTruth, noise: NoiseModel, threshold: f64) -> Result<DepthField> {
    let raw = forward_quadrature(&truth.field, noise)?;
    let field = invert_quadrature(&raw, threshold)?;
    Ok(if fits_range(truth) { field.assume_unwrapped() } else { field })
}

fn refocus_demo(a: &DemoArgs) -> Result<()> {
    let cfg = a.camera.resolve()?;
    let mut m = Manifest::new(&a.out)?;
    let (near, far) = (1.0, 3.0);
    let scene = scenes::fence(near, far, 0.6);
    m.scene(&scene)?;
    let truth = render_ground_truth(&scene, &cfg)?;
    let field = capture(&truth, NoiseModel::none(), DEFAULT_VALIDITY_THRESHOLD)?;
    let center = truth.center_map();
    m.png("truth_depth.png", &center.depth, &center.valid)?;

    let far_s = Shear::from_depth(far, &cfg);
    let region = truth.focus_region(1, far_s)?;
    let far_truth = Array2::from_elem(region.dim(), far);
    m.metric("region_pixels", region.iter().filter(|v| **v).count());
    for (name, depth, mode) in [("far_phasor", far, RefocusMode::Phasor), ("near_phasor", near, RefocusMode::Phasor), ("far_naive", far, RefocusMode::Naive)] {
        let r = refocus(&field, Shear::from_depth(depth, &cfg), mode, None)?;
        m.refocused(name, &r)?;
        m.metric(&format!("{name}_region_rmse_m"), region_rmse(&r.depth, &r.valid, &far_truth, &region, far));
    }
    m.finish("refocus", a.seed, &cfg)
}

fn unwrap_demo(a: &DemoArgs) -> Result<()> {
    let cfg = a.camera.resolve()?;
    let mut m = Manifest::new(&a.out)?;
    let scene = scenes::ramp(&cfg, 0.5, 6.0);
    m.scene(&scene)?;
    let truth = render_ground_truth(&scene, &cfg)?;
    let raw = forward_quadrature(&truth.field, NoiseModel::none())?;
    let field = invert_quadrature(&raw, DEFAULT_VALIDITY_THRESHOLD)?;
    let wrapped_field = simulate_wrapping(&field, 2)?;
    let center = cfg.center_view_index();
    let wrapped = to_depth_map(&wrapped_field, center)?;
    let gt = truth.center_map();
    m.metric("unambiguous_range_m", wrapped.unambiguous_range);

    let cands = candidate_shears(&cfg, 0.4, 7.0, crate::lightfield::DEFAULT_CANDIDATES)?;
    let corr = depth_from_correspondence(&field, &cands, crate::lightfield::DEFAULT_WINDOW)?;
    let mid = cfg.ny / 2;
    let line = CalibrationLine::segment((0, mid), (cfg.nx - 1, mid))?;
    let by_line = unwrap_with_line(&wrapped, &corr.map, &line, DEFAULT_MEDIAN_RADIUS)?;
    let per_pixel = unwrap_per_pixel(&wrapped, &corr.map)?;

    m.png("truth_depth.png", &gt.depth, &gt.valid)?;
    m.png("wrapped_depth.png", &wrapped.depth, &wrapped.valid)?;
    m.png("corr_depth.png", &corr.map.depth, &corr.map.valid)?;
    m.png("unwrapped_line.png", &by_line.map.depth, &by_line.map.valid)?;
    m.png("unwrapped_perpixel.png", &per_pixel.map.depth, &per_pixel.map.valid)?;
    let rows: Vec<Vec<f64>> = (0..cfg.nx)
        .map(|x| vec![x as f64, gt.depth[[x, mid]], wrapped.depth[[x, mid]], corr.map.depth[[x, mid]], by_line.map.depth[[x, mid]], per_pixel.map.depth[[x, mid]]])
        .collect();
    m.table("line_profile.csv", &["x", "truth_m", "wrapped_m", "corr_m", "unwrapped_line_m", "unwrapped_perpixel_m"], &rows)?;

    for (name, out) in [("line", &by_line.map), ("perpixel", &per_pixel.map)] {
        let (exact, rmse) = unwrap_quality(out, &gt);
        m.metric(&format!("{name}_exact_fraction"), exact);
        m.metric(&format!("{name}_trimmed90_rmse_m"), rmse);
    }
    m.metric("line_events", by_line.report.events);

    // a calibration line over the near half only leaves the far depths uncalibrated
    let partial = CalibrationLine::segment((cfg.nx / 2, mid), (cfg.nx - 1, mid))?;
    let part = unwrap_with_line(&wrapped, &corr.map, &partial, DEFAULT_MEDIAN_RADIUS)?;
    let beyond = part.report.covered.1 + 0.5;
    let (flagged, total) = gt.depth.indexed_iter().filter(|(i, d)| gt.valid[*i] && **d > beyond).fold((0, 0), |(f, t), (i, _)| (f + part.map.low_confidence[i] as usize, t + 1));
    m.png("partial_line_low_confidence.png", &part.map.low_confidence.mapv(|f| f as u8 as f64), &part.map.valid)?;
    m.metric("partial_line_covered_max_m", part.report.covered.1);
    m.metric("partial_line_uncovered_flagged_fraction", flagged as f64 / total.max(1) as f64);
    m.finish("unwrap", a.seed, &cfg)
}

/// Fraction of valid pixels with exact depth (1 µm) and the RMSE over the 90%
/// of valid pixels with the smallest error.
pub(crate) fn unwrap_quality(out: &DepthMap, truth: &DepthMap) -> (f64, f64) {
    let mut err: Vec<f64> = truth.valid.indexed_iter().filter(|(_, v)| **v).map(|(i, _)| if out.valid[i] { (out.depth[i] - truth.depth[i]).abs() } else { f64::INFINITY }).collect();
    if err.is_empty() {
        return (0.0, 0.0);
    }
    let exact = err.iter().filter(|e| **e < 1e-6).count() as f64 / err.len() as f64;
    err.sort_by(f64::total_cmp);
    let keep = (err.len() as f64 * 0.9).ceil() as usize;
    let rmse = (err[..keep].iter().map(|e| e * e).sum::<f64>() / keep as f64).sqrt();
    (exact, rmse)
}

/// Noise level of the occlusion demo and the amplitude threshold that keeps
/// noise-only rays from passing as valid.
const OCCLUSION_SIGMA: f64 = 0.005;
const OCCLUSION_THRESHOLD: f64 = 0.1;

fn occlusion_demo(a: &DemoArgs) -> Result<()> {
    let cfg = a.camera.resolve()?;
    let mut m = Manifest::new(&a.out)?;
    let (near, far) = (1.0, 3.0);
    let scene = scenes::foliage(&cfg, near, far, a.seed);
    m.scene(&scene)?;
    let truth = render_ground_truth(&scene, &cfg)?;
    let field = capture(&truth, NoiseModel::gaussian(OCCLUSION_SIGMA, a.seed)?, OCCLUSION_THRESHOLD)?;
    if field.wrapped {
        return Err(Error::InvalidArgument("scene depths exceed the unambiguous range".into()));
    }

    let hist = depth_histogram(&field, DEFAULT_BINS, (0.0, cfg.unambiguous_range()))?;
    let hist_path = m.path("depth_histogram.csv");
    hist.write_csv(&hist_path)?;
    m.add(&hist_path);
    m.metric("histogram_peaks_m", hist.peaks(0.05).iter().map(|b| hist.bin_center(*b)).collect::<Vec<_>>());

    let clusters = cluster_depths(&field, 2, a.seed)?;
    m.metric("centroids_m", clusters.centroids.clone());
    let s = Shear::from_depth(far, &cfg);
    let masked = refocus_without_foreground(&field, &clusters, None, s, RefocusMode::Phasor)?;
    let plain = refocus(&field, s, RefocusMode::Phasor, None)?;
    m.refocused("masked", &masked.refocused)?;
    m.refocused("unmasked", &plain)?;

    // background region: center pixels that see the board once the foliage is gone
    let board = Scene::new(vec![scene.objects[1].clone()]);
    let board_truth = render_ground_truth(&board, &cfg.with_views(1, 1))?;
    let region = board_truth.object.index_axis(Axis(0), 0).index_axis(Axis(0), 0).mapv(|o| o == 0);
    let depth = Array2::from_elem(region.dim(), far);
    let (fm, fu) = (fraction_within(&masked.refocused, &depth, &region, 0.01), fraction_within(&plain, &depth, &region, 0.01));
    m.metric("background_pixels", region.iter().filter(|v| **v).count());
    m.metric("masked_within_1cm", fm);
    m.metric("unmasked_within_1cm", fu);
    m.metric("masked_rays", masked.masked_rays);

    let y = cfg.ny / 2;
    let r = &masked.refocused;
    let rows: Vec<Vec<f64>> = (0..cfg.nx)
        .map(|x| {
            let region_truth = if region[[x, y]] { far } else { f64::NAN };
            vec![x as f64, region_truth, r.depth[[x, y]], r.valid[[x, y]] as u8 as f64, plain.depth[[x, y]], plain.valid[[x, y]] as u8 as f64]
        })
        .collect();
    m.table("scan_line.csv", &["x", "truth_m", "masked_m", "masked_valid", "unmasked_m", "unmasked_valid"], &rows)?;
    m.finish("occlusion", a.seed, &cfg)
}

fn multiplex_demo(a: &DemoArgs) -> Result<()> {
    let mut camera = a.camera.clone();
    if camera.views.is_none() {
        camera.views = Some(vec![3, 3]);
    }
    let cfg = camera.resolve()?;
    let mut m = Manifest::new(&a.out)?;
    let scene = scenes::two_planes(1.0, 3.0);
    m.scene(&scene)?;
    let truth = render_ground_truth(&scene, &cfg)?;
    let opts = GeneratorOptions { seed: a.seed, max_condition: Some(50.0), row_normalize: true };
    let matrix = ModulationMatrix::random_binary((cfg.nu, cfg.nv), (1, 1), opts)?;
    let mtx = m.path("matrix.mtx");
    matrix.write(&mtx)?;
    m.add(&mtx);
    m.metric("condition", matrix.condition_numbers()[0]);

    let raw = forward_multiplex(&truth.field, &matrix, NoiseModel::none())?;
    let sensor = raw.frames.slice(s![0, 0, 0, .., ..]).to_owned();
    m.png("sensor_frame0.png", &sensor, &Array2::from_elem(sensor.dim(), true))?;
    let clean = invert_multiplex(&raw, &matrix, 0.0)?;
    let (mut da, mut dp) = (0.0f64, 0.0f64);
    for (i, ok) in truth.field.valid.indexed_iter() {
        if *ok {
            da = da.max((clean.field.albedo[i] - truth.field.albedo[i]).abs());
            dp = dp.max(crate::lightfield::phase_distance(clean.field.phase[i], crate::phase::wrap_phase(truth.field.phase[i])));
        }
    }
    m.metric("noiseless_max_albedo_error", da);
    m.metric("noiseless_max_phase_error_rad", dp);
    let recovered = to_depth_map(&clean.field, cfg.center_view_index())?;
    m.png("recovered_depth.png", &recovered.depth, &recovered.valid)?;

    let sigma = 1e-3;
    let noisy = forward_multiplex(&truth.field, &matrix, NoiseModel::gaussian(sigma, a.seed)?)?;
    let reg = invert_multiplex(&noisy, &matrix, 1e-3)?;
    let d = mixed_signal(&truth.field);
    let rms = (reg.mixed.frames.iter().zip(d.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    m.metric("noisy_sigma", sigma);
    m.metric("noisy_lambda", 1e-3);
    m.metric("noisy_mixed_rms_error", rms);
    m.finish("multiplex", a.seed, &cfg)
}
