//! The `depthfield` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data or format problem, 3 numerical
//! failure such as a rank-deficient modulation matrix.

mod demo;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::CameraArrayConfig;
use crate::dfz::{read_dfz, read_header, write_dfz, Dfz};
use crate::error::{Error, Result};
use crate::export::{write_image_csv, write_png};
use crate::field::{DepthField, DepthMap};
use crate::lightfield::{candidate_shears, depth_from_correspondence, refocus, RefocusMode, Refocused, Shear};
use crate::multiplex::{forward_multiplex, invert_multiplex, Generator, GeneratorOptions, ModulationMatrix};
use crate::occlusion::{cluster_depths, depth_histogram, refocus_without_foreground, DEFAULT_BINS};
use crate::simulator::{forward_quadrature, render_ground_truth_with, NoiseModel, RenderOptions, Scene};
use crate::tof::{invert_quadrature, to_depth_map, DEFAULT_VALIDITY_THRESHOLD};
use crate::unwrap::{unwrap_per_pixel, unwrap_with_line, CalibrationLine, DEFAULT_MEDIAN_RADIUS};

#[derive(Debug, Parser)]
#[command(name = "depthfield", version, about = "Simulate, recover and process time-of-flight depth fields")]
pub struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene to raw quadrature frames (and optionally ground truth).
    Simulate(SimulateArgs),
    /// Demodulate quadrature frames into a wrapped depth field.
    Invert(InvertArgs),
    /// Export one view of a depth field as PNG and/or CSV.
    Depthmap(DepthmapArgs),
    /// Synthetic-aperture refocus at a depth or shear slope.
    Refocus(RefocusArgs),
    /// Coarse wrap-free depth from cross-view correspondence.
    Corrdepth(CorrdepthArgs),
    /// Unwrap a wrapped depth map with a correspondence depth map.
    Unwrap(UnwrapArgs),
    /// Refocus after removing the foreground depth cluster.
    OccludeRefocus(OccludeArgs),
    /// Simulate multiplexed single-shot capture of a depth field.
    Multiplex(MultiplexArgs),
    /// Invert multiplexed frames back to a depth field.
    Demultiplex(DemultiplexArgs),
    /// Print the header of a DFZ file as JSON.
    Info(InfoArgs),
    /// End-to-end demonstrations on canned scenes.
    #[command(subcommand)]
    Demo(demo::DemoCommand),
}

/// Camera parameters: a JSON config file, overridden field by field.
#[derive(Debug, Clone, Default, Args)]
pub struct CameraArgs {
    /// Camera array config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["NU", "NV"])]
    pub views: Option<Vec<usize>>,
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    pub pixels: Option<Vec<usize>>,
    /// View spacing in meters along u and v.
    #[arg(long, num_args = 2, value_names = ["BU", "BV"])]
    pub baseline: Option<Vec<f64>>,
    #[arg(long, value_name = "METERS")]
    pub focal_length: Option<f64>,
    #[arg(long, value_name = "METERS")]
    pub pixel_pitch: Option<f64>,
    #[arg(long, value_name = "HZ")]
    pub f_mod: Option<f64>,
    /// Speed of light in m/s.
    #[arg(long)]
    pub c: Option<f64>,
}

impl CameraArgs {
    pub fn resolve(&self) -> Result<CameraArrayConfig> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => CameraArrayConfig::default(),
        };
        if let Some(v) = &self.views {
            (cfg.nu, cfg.nv) = (v[0], v[1]);
        }
        if let Some(p) = &self.pixels {
            (cfg.nx, cfg.ny) = (p[0], p[1]);
        }
        if let Some(b) = &self.baseline {
            (cfg.baseline_u, cfg.baseline_v) = (b[0], b[1]);
        }
        cfg.focal_length = self.focal_length.unwrap_or(cfg.focal_length);
        cfg.pixel_pitch = self.pixel_pitch.unwrap_or(cfg.pixel_pitch);
        cfg.f_mod = self.f_mod.unwrap_or(cfg.f_mod);
        cfg.c = self.c.unwrap_or(cfg.c);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene description (JSON).
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub camera: CameraArgs,
    /// Gaussian noise std-dev added to every raw sample.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Noise seed; required when noise is enabled.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Average albedo over 2x2 sub-pixel rays.
    #[arg(long)]
    pub supersample: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the unwrapped ground-truth depth field here.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rays below this fraction of the peak amplitude are invalid.
    #[arg(long, default_value_t = DEFAULT_VALIDITY_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct DepthmapArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// View to export; defaults to the center view.
    #[arg(long, num_args = 2, value_names = ["U", "V"])]
    pub view: Option<Vec<usize>>,
    #[arg(long, required_unless_present = "csv")]
    pub png: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FocusArgs {
    /// Focus depth in meters.
    #[arg(long, required_unless_present = "slope", conflicts_with = "slope")]
    pub depth: Option<f64>,
    /// Shear slope in pixels per view step along u.
    #[arg(long, allow_negative_numbers = true)]
    pub slope: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Phasor)]
    pub mode: ModeArg,
}

impl FocusArgs {
    fn shear(&self, cfg: &CameraArrayConfig) -> Result<Shear> {
        match (self.depth, self.slope) {
            (Some(d), _) if !(d > 0.0) => Err(Error::InvalidArgument(format!("focus depth must be > 0, got {d}"))),
            (Some(d), _) => Ok(Shear::from_depth(d, cfg)),
            (None, Some(s)) => Ok(Shear::new(s)),
            (None, None) => Err(Error::InvalidArgument("give --depth or --slope".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Phasor,
    Naive,
}

impl From<ModeArg> for RefocusMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Phasor => RefocusMode::Phasor,
            ModeArg::Naive => RefocusMode::Naive,
        }
    }
}

#[derive(Debug, Args)]
pub struct RefocusArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub focus: FocusArgs,
    /// Writes `<prefix>_albedo.png`, `<prefix>_depth.png`, `<prefix>_depth.csv`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrdepthArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub dmin: f64,
    #[arg(long)]
    pub dmax: f64,
    #[arg(long, default_value_t = crate::lightfield::DEFAULT_CANDIDATES)]
    pub candidates: usize,
    #[arg(long, default_value_t = crate::lightfield::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnwrapMethod {
    Line,
    Perpixel,
}

fn parse_line(s: &str) -> std::result::Result<CalibrationLine, String> {
    CalibrationLine::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct UnwrapArgs {
    #[arg(long)]
    pub wrapped: PathBuf,
    #[arg(long)]
    pub corr: PathBuf,
    /// Calibration segment `x0,y0:x1,y1` on the center view.
    #[arg(long, value_parser = parse_line, required_if_eq("method", "line"))]
    pub line: Option<CalibrationLine>,
    #[arg(long, default_value_t = DEFAULT_MEDIAN_RADIUS)]
    pub median: usize,
    #[arg(long, value_enum, default_value_t = UnwrapMethod::Line)]
    pub method: UnwrapMethod,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OccludeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[command(flatten)]
    pub focus: FocusArgs,
    /// Cluster to drop; defaults to the nearest one.
    #[arg(long)]
    pub foreground: Option<usize>,
    #[arg(long)]
    pub out_prefix: PathBuf,
    /// Depth histogram CSV.
    #[arg(long)]
    pub hist: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Histogram range in meters; defaults to the unambiguous range.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub range: Option<Vec<f64>>,
    /// k-means++ seed.
    #[arg(long)]
    pub seed: u64,
    /// Treat a wrapped input as unwrapped (every depth inside one range).
    #[arg(long)]
    pub assume_unwrapped: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    /// `pinhole`, `random-binary`, `random-gaussian` or a `.mtx` file.
    #[arg(long)]
    pub matrix: String,
    /// Spatial block size in pixels.
    #[arg(long, num_args = 2, value_names = ["BX", "BY"], default_values_t = [1, 1])]
    pub block: Vec<usize>,
    /// Seed for random generators.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Redraw random matrices until their condition number is below this.
    #[arg(long)]
    pub max_condition: Option<f64>,
    /// Scale each row of a generated matrix to sum to one.
    #[arg(long)]
    pub row_normalize: bool,
}

impl MatrixArgs {
    fn build(&self, views: (usize, usize)) -> Result<ModulationMatrix> {
        let generator = match self.matrix.as_str() {
            "pinhole" => Generator::Pinhole,
            "random-binary" => Generator::RandomBinary,
            "random-gaussian" => Generator::RandomGaussian,
            path => {
                let m = ModulationMatrix::read(path)?;
                if m.views != views {
                    return Err(Error::Shape(format!("matrix is for {:?} views, data has {views:?}", m.views)));
                }
                return Ok(m);
            }
        };
        let seed = match (generator, self.seed) {
            (Generator::Pinhole, s) => s.unwrap_or(0),
            (_, Some(s)) => s,
            (_, None) => return Err(Error::InvalidArgument("random matrices need --seed".into())),
        };
        let opts = GeneratorOptions { seed, max_condition: self.max_condition, row_normalize: self.row_normalize };
        ModulationMatrix::generate(generator, views, (self.block[0], self.block[1]), opts)
    }
}

#[derive(Debug, Args)]
pub struct MultiplexArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Sensor noise seed; required when noise is enabled.
    #[arg(long)]
    pub noise_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the matrix that was used.
    #[arg(long)]
    pub save_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemultiplexArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Angular resolution of the captured field.
    #[arg(long, num_args = 2, value_names = ["NU", "NV"], required = true)]
    pub views: Vec<usize>,
    /// Tikhonov weight.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_VALIDITY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the recovered per-ray `D'` frames.
    #[arg(long)]
    pub mixed_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

fn noise(sigma: f64, seed: Option<u64>) -> Result<NoiseModel> {
    match (sigma, seed) {
        (s, _) if s == 0.0 => Ok(NoiseModel::none()),
        (s, Some(seed)) => NoiseModel::gaussian(s, seed),
        (_, None) => Err(Error::InvalidArgument("noise needs an explicit seed".into())),
    }
}

fn read_field(path: &Path) -> Result<DepthField> {
    Ok(read_dfz(path)?.into_field()?)
}

/// The center view of a field as a depth map.
fn center_map(field: &DepthField) -> Result<DepthMap> {
    to_depth_map(field, field.config.center_view_index())
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the albedo PNG, depth PNG and depth CSV of a refocused image.
pub(crate) fn write_refocused(prefix: &Path, r: &Refocused) -> Result<Vec<PathBuf>> {
    let files = [with_suffix(prefix, "_albedo.png"), with_suffix(prefix, "_depth.png"), with_suffix(prefix, "_depth.csv")];
    let a = write_png(&files[0], &r.albedo, &r.valid)?;
    let d = write_png(&files[1], &r.depth, &r.valid)?;
    write_image_csv(&files[2], &r.depth, &r.valid)?;
    let mut out = files.to_vec();
    out.extend([a, d]);
    Ok(out)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = a.camera.resolve()?;
    let scene = Scene::from_json(&std::fs::read_to_string(&a.scene)?)?;
    let noise = noise(a.noise_sigma, a.seed)?;
    let truth = render_ground_truth_with(&scene, &cfg, RenderOptions { supersample_albedo: a.supersample })?;
    let raw = forward_quadrature(&truth.field, noise)?;
    write_dfz(&Dfz::Quadrature(raw), &a.out)?;
    if let Some(path) = a.truth {
        write_dfz(&Dfz::Field(truth.field), path)?;
    }
    Ok(())
}

fn invert(a: InvertArgs) -> Result<()> {
    let stack = read_dfz(&a.input)?.into_quadrature()?;
    let field = invert_quadrature(&stack, a.threshold)?;
    write_dfz(&Dfz::Field(field), &a.out)?;
    Ok(())
}

fn depthmap(a: DepthmapArgs) -> Result<()> {
    let field = read_field(&a.input)?;
    let view = match &a.view {
        Some(v) => (v[0], v[1]),
        None => field.config.center_view_index(),
    };
    let map = to_depth_map(&field, view)?;
    if let Some(png) = &a.png {
        write_png(png, &map.depth, &map.valid)?;
    }
    if let Some(csv) = &a.csv {
        write_image_csv(csv, &map.depth, &map.valid)?;
    }
    Ok(())
}

fn refocus_cmd(a: RefocusArgs) -> Result<()> {
    let field = read_field(&a.input)?;
    let s = a.focus.shear(&field.config)?;
    let r = refocus(&field, s, a.focus.mode.into(), None)?;
    write_refocused(&a.out_prefix, &r)?;
    print_json(&json!({ "slope": s.slope, "depth_m": s.depth(&field.config), "empty_pixels": r.empty_pixels }));
    Ok(())
}

fn corrdepth(a: CorrdepthArgs) -> Result<()> {
    let field = read_field(&a.input)?;
    let cands = candidate_shears(&field.config, a.dmin, a.dmax, a.candidates)?;
    let corr = depth_from_correspondence(&field, &cands, a.window)?;
    let out = DepthField::from_depth_map(&corr.map, &field.config)?;
    write_dfz(&Dfz::Field(out), &a.out)?;
    let low = corr.map.low_confidence.iter().filter(|f| **f).count();
    print_json(&json!({ "valid_pixels": corr.map.valid_count(), "low_confidence_pixels": low }));
    Ok(())
}

fn unwrap_cmd(a: UnwrapArgs) -> Result<()> {
    let wrapped_field = read_field(&a.wrapped)?;
    if !wrapped_field.wrapped {
        return Err(Error::InvalidArgument(format!("{} is not marked wrapped", a.wrapped.display())));
    }
    let wrapped = center_map(&wrapped_field)?;
    let corr_field = read_field(&a.corr)?;
    let mut corr = center_map(&corr_field)?;
    corr.wrapped = false;
    let out = match a.method {
        UnwrapMethod::Line => {
            let line = a.line.as_ref().expect("clap requires --line for the line method");
            unwrap_with_line(&wrapped, &corr, line, a.median)?
        }
        UnwrapMethod::Perpixel => unwrap_per_pixel(&wrapped, &corr)?,
    };
    let field = DepthField::from_depth_map(&out.map, &wrapped_field.config)?;
    write_dfz(&Dfz::Field(field), &a.out)?;
    let r = &out.report;
    let intervals: Vec<_> = r.intervals.iter().map(|i| json!({ "count": i.count, "lo_m": finite(i.lo), "hi_m": finite(i.hi) })).collect();
    print_json(&json!({
        "events": r.events,
        "monotone": r.monotone,
        "invalid_fraction": r.invalid_fraction,
        "covered_m": [finite(r.covered.0), finite(r.covered.1)],
        "intervals": intervals,
        "low_confidence_pixels": out.map.low_confidence.iter().filter(|f| **f).count(),
    }));
    Ok(())
}

/// JSON has no infinities; unbounded interval ends print as null.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn occlude(a: OccludeArgs) -> Result<()> {
    let mut field = read_field(&a.input)?;
    if a.assume_unwrapped {
        field = field.assume_unwrapped();
    }
    let range = match &a.range {
        Some(r) => (r[0], r[1]),
        None => (0.0, field.config.unambiguous_range()),
    };
    let hist = depth_histogram(&field, a.bins, range)?;
    if let Some(path) = &a.hist {
        hist.write_csv(path)?;
    }
    let clusters = cluster_depths(&field, a.k, a.seed)?;
    let s = a.focus.shear(&field.config)?;
    let out = refocus_without_foreground(&field, &clusters, a.foreground, s, a.focus.mode.into())?;
    write_refocused(&a.out_prefix, &out.refocused)?;
    print_json(&json!({
        "centroids_m": clusters.centroids,
        "iterations": clusters.iterations,
        "foreground": out.foreground,
        "masked_rays": out.masked_rays,
        "empty_pixels": out.refocused.empty_pixels,
    }));
    Ok(())
}

fn multiplex_cmd(a: MultiplexArgs) -> Result<()> {
    let field = read_field(&a.input)?;
    let m = a.matrix.build((field.config.nu, field.config.nv))?;
    let raw = forward_multiplex(&field, &m, noise(a.noise_sigma, a.noise_seed)?)?;
    write_dfz(&Dfz::Quadrature(raw), &a.out)?;
    if let Some(path) = &a.save_matrix {
        m.write(path)?;
    }
    print_json(&json!({ "generator": m.generator, "condition": m.condition_numbers() }));
    Ok(())
}

fn demultiplex_cmd(a: DemultiplexArgs) -> Result<()> {
    let stack = read_dfz(&a.input)?.into_quadrature()?;
    let m = a.matrix.build((a.views[0], a.views[1]))?;
    let out = invert_multiplex(&stack, &m, a.lambda)?;
    let field = invert_quadrature(&out.mixed, a.threshold)?;
    write_dfz(&Dfz::Field(field), &a.out)?;
    if let Some(path) = &a.mixed_out {
        write_dfz(&Dfz::Quadrature(out.mixed), path)?;
    }
    print_json(&json!({ "condition": out.condition.iter().map(|c| finite(*c)).collect::<Vec<_>>() }));
    Ok(())
}

fn info(a: InfoArgs) -> Result<()> {
    let header = read_header(&a.input)?;
    print_json(&serde_json::to_value(header)?);
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Invert(a) => invert(a),
        Command::Depthmap(a) => depthmap(a),
        Command::Refocus(a) => refocus_cmd(a),
        Command::Corrdepth(a) => corrdepth(a),
        Command::Unwrap(a) => unwrap_cmd(a),
        Command::OccludeRefocus(a) => occlude(a),
        Command::Multiplex(a) => multiplex_cmd(a),
        Command::Demultiplex(a) => demultiplex_cmd(a),
        Command::Info(a) => info(a),
        Command::Demo(d) => demo::run(d),
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::CalibrationLine(_) => 1,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

/// Parses `args` and runs the command inside a pool of `--threads` workers.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n as usize);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| run(cli.command)),
        Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn main() -> ExitCode {
    main_with(std::env::args_os())
}
