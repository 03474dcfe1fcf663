//! Single-frequency phase unwrapping guided by a wrap-free correspondence
//! depth map.
//!
//! The line method walks a user-chosen calibration line (a path along which
//! the true depth varies continuously, e.g. a side wall), counts how often
//! the wrapped TOF depth wraps along it, and records the correspondence depth
//! at which every wrap happens. Those crossing depths split correspondence
//! depth into half-open intervals, one per wrap count; every other pixel
//! looks its count up from its (median-filtered) correspondence depth. Only
//! the coarse ordering of the correspondence depth matters, so its error can
//! be much larger than the TOF precision.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DepthMap;

pub const DEFAULT_MEDIAN_RADIUS: usize = 2;

/// An 8-connected pixel path on the center-view grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationLine {
    points: Vec<(usize, usize)>,
}

impl CalibrationLine {
    pub fn new(points: Vec<(usize, usize)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::CalibrationLine(format!("needs at least 2 pixels, got {}", points.len())));
        }
        for w in points.windows(2) {
            let dx = w[0].0.abs_diff(w[1].0);
            let dy = w[0].1.abs_diff(w[1].1);
            if dx > 1 || dy > 1 || (dx == 0 && dy == 0) {
                return Err(Error::CalibrationLine(format!("{:?} -> {:?} is not an 8-connected step", w[0], w[1])));
            }
        }
        Ok(Self { points })
    }

    /// Bresenham rasterization of the segment between two pixels.
    pub fn segment(from: (usize, usize), to: (usize, usize)) -> Result<Self> {
        let (mut x, mut y) = (from.0 as i64, from.1 as i64);
        let (x1, y1) = (to.0 as i64, to.1 as i64);
        let dx = (x1 - x).abs();
        let dy = -(y1 - y).abs();
        let sx = if x < x1 { 1 } else { -1 };
        let sy = if y < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        let mut points = vec![(x as usize, y as usize)];
        while (x, y) != (x1, y1) {
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
            points.push((x as usize, y as usize));
        }
        Self::new(points)
    }

    /// Parses `"x0,y0:x1,y1"` and rasterizes the segment.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::CalibrationLine(format!("expected x0,y0:x1,y1, got {spec:?}"));
        let (a, b) = spec.split_once(':').ok_or_else(bad)?;
        let point = |s: &str| -> Result<(usize, usize)> {
            let (x, y) = s.split_once(',').ok_or_else(bad)?;
            Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
        };
        Self::segment(point(a)?, point(b)?)
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Correspondence-depth interval `(lo, hi]` assigned to one wrap count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrapInterval {
    pub count: i32,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineReport {
    /// Fraction of line pixels without a usable correspondence depth.
    pub invalid_fraction: f64,
    /// Whether correspondence depth along the line was already monotone.
    pub monotone: bool,
    /// Wrap events detected along the line.
    pub events: usize,
    /// Calibrated intervals, ordered by count. The first has `lo = -inf`
    /// and the last `hi = +inf`.
    pub intervals: Vec<WrapInterval>,
    /// Range of correspondence depths observed on the line.
    pub covered: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Unwrapped {
    pub map: DepthMap,
    pub counts: Array2<i32>,
    pub report: LineReport,
}

/// Valid-aware median over a `(2r+1)^2` window. Invalid pixels stay invalid.
pub fn median_filter(map: &DepthMap, radius: usize) -> DepthMap {
    if radius == 0 {
        return map.clone();
    }
    let (nx, ny) = map.dim();
    let r = radius as isize;
    let rows: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|x| {
            let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
            (0..ny)
                .map(|y| {
                    if !map.valid[[x, y]] {
                        return map.depth[[x, y]];
                    }
                    window.clear();
                    for dx in -r..=r {
                        for dy in -r..=r {
                            let (i, j) = (x as isize + dx, y as isize + dy);
                            if i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && map.valid[[i as usize, j as usize]] {
                                window.push(map.depth[[i as usize, j as usize]]);
                            }
                        }
                    }
                    window.sort_by(f64::total_cmp);
                    let n = window.len();
                    if n % 2 == 1 {
                        window[n / 2]
                    } else {
                        0.5 * (window[n / 2 - 1] + window[n / 2])
                    }
                })
                .collect()
        })
        .collect();
    let mut out = map.clone();
    for (x, row) in rows.into_iter().enumerate() {
        for (y, d) in row.into_iter().enumerate() {
            out.depth[[x, y]] = d;
        }
    }
    out
}

fn check_inputs(wrapped: &DepthMap, corr: &DepthMap) -> Result<()> {
    if !wrapped.wrapped {
        return Err(Error::InvalidArgument("input depth map is not marked wrapped".into()));
    }
    if corr.wrapped {
        return Err(Error::InvalidArgument("correspondence depth must be unwrapped".into()));
    }
    if !wrapped.congruent(corr) {
        return Err(Error::Shape(format!("wrapped map is {:?}, correspondence map is {:?}", wrapped.dim(), corr.dim())));
    }
    if !(wrapped.unambiguous_range > 0.0) {
        return Err(Error::InvalidArgument("unambiguous range must be positive".into()));
    }
    Ok(())
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Unwraps `wrapped` using wrap counts calibrated along `line`.
pub fn unwrap_with_line(wrapped: &DepthMap, corr: &DepthMap, line: &CalibrationLine, median_radius: usize) -> Result<Unwrapped> {
    check_inputs(wrapped, corr)?;
    let (nx, ny) = wrapped.dim();
    if let Some(p) = line.points().iter().find(|(x, y)| *x >= nx || *y >= ny) {
        return Err(Error::CalibrationLine(format!("pixel {p:?} outside {nx}x{ny} image")));
    }
    let range = wrapped.unambiguous_range;
    let filtered = median_filter(corr, median_radius);

    let corr_invalid = line.points().iter().filter(|p| !filtered.valid[**p]).count();
    let invalid_fraction = corr_invalid as f64 / line.len() as f64;
    if invalid_fraction > 0.5 {
        return Err(Error::CalibrationLine(format!("correspondence depth invalid on {:.0}% of the line", invalid_fraction * 100.0)));
    }
    let samples: Vec<(usize, usize)> = line.points().iter().copied().filter(|p| filtered.valid[*p] && wrapped.valid[*p]).collect();
    if samples.len() < 2 {
        return Err(Error::CalibrationLine("fewer than 2 line pixels have both depths".into()));
    }

    // orient the correspondence trend so a monotone fit is non-decreasing
    let raw: Vec<f64> = samples.iter().map(|p| filtered.depth[*p]).collect();
    let n = raw.len() as f64;
    let mean_i = (n - 1.0) / 2.0;
    let mean_c = raw.iter().sum::<f64>() / n;
    let slope: f64 = raw.iter().enumerate().map(|(i, c)| (i as f64 - mean_i) * (c - mean_c)).sum();
    let sign = if slope < 0.0 { -1.0 } else { 1.0 };
    let oriented: Vec<f64> = raw.iter().map(|c| sign * c).collect();
    let monotone = oriented.windows(2).all(|w| w[0] <= w[1]);
    let fitted: Vec<f64> = isotonic(&oriented).into_iter().map(|c| sign * c).collect();

    // walk the line; a drop of more than half a range means the true depth
    // crossed a wrap boundary upward, a rise the opposite
    let w: Vec<f64> = samples.iter().map(|p| wrapped.depth[*p]).collect();
    let mut count = 0;
    let mut counts = vec![count];
    let mut crossings: Vec<(i32, f64)> = Vec::new();
    for i in 1..w.len() {
        let jump = w[i] - w[i - 1];
        if jump.abs() > 0.5 * range {
            let (lower, below, above) = if jump < 0.0 {
                count += 1;
                (count - 1, w[i - 1], w[i])
            } else {
                count -= 1;
                (count, w[i], w[i - 1])
            };
            // fraction of the way from the deeper-count side to the crossing
            let (c_low, c_high) = if jump < 0.0 { (fitted[i - 1], fitted[i]) } else { (fitted[i], fitted[i - 1]) };
            let t = (range - below) / ((range - below) + above);
            crossings.push((lower, c_low + t.clamp(0.0, 1.0) * (c_high - c_low)));
        }
        counts.push(count);
    }
    // anchor the relative counts where they agree best with correspondence
    // over the whole line; depth is never negative
    let mut anchor: Vec<f64> = counts.iter().zip(&w).zip(&fitted).map(|((k, w), c)| (c - w) / range - *k as f64).collect();
    anchor.sort_by(f64::total_cmp);
    let lowest = *counts.iter().min().unwrap();
    let base = (anchor[anchor.len() / 2].round() as i32).max(-lowest);
    counts.iter_mut().for_each(|k| *k += base);
    crossings.iter_mut().for_each(|(k, _)| *k += base);

    let min_count = *counts.iter().min().unwrap();
    let max_count = *counts.iter().max().unwrap();
    let mut bounds = Vec::new();
    for k in min_count..max_count {
        let at: Vec<f64> = crossings.iter().filter(|(l, _)| *l == k).map(|(_, c)| *c).collect();
        bounds.push(at.iter().sum::<f64>() / at.len() as f64);
    }
    // keep boundaries ordered even if noisy crossings interleave
    for i in 1..bounds.len() {
        if bounds[i] < bounds[i - 1] {
            bounds[i] = bounds[i - 1];
        }
    }
    let intervals: Vec<WrapInterval> = (min_count..=max_count)
        .enumerate()
        .map(|(i, k)| WrapInterval {
            count: k,
            lo: if i == 0 { f64::NEG_INFINITY } else { bounds[i - 1] },
            hi: bounds.get(i).copied().unwrap_or(f64::INFINITY),
        })
        .collect();
    let covered = fitted.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(*c), hi.max(*c)));

    let lookup = |c: f64| -> i32 { min_count + bounds.iter().filter(|b| c > **b).count() as i32 };
    let mut out = wrapped.clone();
    out.wrapped = false;
    let mut count_map = Array2::zeros((nx, ny));
    for x in 0..nx {
        for y in 0..ny {
            if !wrapped.valid[[x, y]] {
                continue;
            }
            let (k, uncalibrated) = if filtered.valid[[x, y]] {
                let c = filtered.depth[[x, y]];
                (lookup(c), c < covered.0 || c > covered.1)
            } else {
                (0, true)
            };
            count_map[[x, y]] = k;
            out.depth[[x, y]] = wrapped.depth[[x, y]] + k as f64 * range;
            out.low_confidence[[x, y]] = wrapped.low_confidence[[x, y]] || uncalibrated;
        }
    }
    let report = LineReport { invalid_fraction, monotone, events: crossings.len(), intervals, covered };
    Ok(Unwrapped { map: out, counts: count_map, report })
}

/// Baseline that picks `n = round((corr - wrapped) / range)` independently
/// per pixel. Exact whenever the correspondence error is below half a range.
pub fn unwrap_per_pixel(wrapped: &DepthMap, corr: &DepthMap) -> Result<Unwrapped> {
    check_inputs(wrapped, corr)?;
    let range = wrapped.unambiguous_range;
    let (nx, ny) = wrapped.dim();
    let mut out = wrapped.clone();
    out.wrapped = false;
    let mut counts = Array2::zeros((nx, ny));
    for x in 0..nx {
        for y in 0..ny {
            if !wrapped.valid[[x, y]] {
                continue;
            }
            if !corr.valid[[x, y]] {
                out.low_confidence[[x, y]] = true;
                continue;
            }
            let k = ((corr.depth[[x, y]] - wrapped.depth[[x, y]]) / range).round().max(0.0) as i32;
            counts[[x, y]] = k;
            out.depth[[x, y]] = wrapped.depth[[x, y]] + k as f64 * range;
            out.low_confidence[[x, y]] |= corr.low_confidence[[x, y]];
        }
    }
    Ok(Unwrapped { map: out, counts, report: LineReport::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::wrap_depth;

    fn maps(truth: &Array2<f64>, range: f64) -> (DepthMap, DepthMap) {
        let dim = truth.dim();
        let wrapped = DepthMap::new(truth.mapv(|d| wrap_depth(d, range)), Array2::ones(dim), Array2::from_elem(dim, true), true, range).unwrap();
        let corr = DepthMap::new(truth.clone(), Array2::ones(dim), Array2::from_elem(dim, true), false, range).unwrap();
        (wrapped, corr)
    }

    fn ramp(nx: usize, ny: usize, lo: f64, hi: f64) -> Array2<f64> {
        Array2::from_shape_fn((nx, ny), |(x, _)| lo + (hi - lo) * x as f64 / (nx - 1) as f64)
    }

    #[test]
    fn line_parsing_and_rasterization() {
        let l = CalibrationLine::parse("0,0:4,2").unwrap();
        assert_eq!(l.points().first(), Some(&(0, 0)));
        assert_eq!(l.points().last(), Some(&(4, 2)));
        assert_eq!(l.len(), 5);
        assert!(CalibrationLine::parse("0,0-4,2").is_err());
        assert!(CalibrationLine::parse("0,0:4").is_err());
        assert!(CalibrationLine::parse("3,3:3,3").is_err());
        assert!(CalibrationLine::new(vec![(0, 0), (2, 0)]).is_err());
    }

    #[test]
    fn shallow_scene_is_identity() {
        let truth = ramp(30, 10, 0.5, 2.0);
        let (w, c) = maps(&truth, 2.5);
        let line = CalibrationLine::segment((0, 5), (29, 5)).unwrap();
        let out = unwrap_with_line(&w, &c, &line, 2).unwrap();
        assert!(out.counts.iter().all(|n| *n == 0));
        assert_eq!(out.map.depth, w.depth);
        let pp = unwrap_per_pixel(&w, &c).unwrap();
        assert_eq!(pp.map.depth, w.depth);
    }

    #[test]
    fn ground_truth_corr_is_exact_for_both_methods() {
        let truth = ramp(200, 8, 0.5, 6.0);
        let (w, c) = maps(&truth, 2.5);
        let line = CalibrationLine::segment((0, 3), (199, 3)).unwrap();
        let out = unwrap_with_line(&w, &c, &line, 0).unwrap();
        assert_eq!(out.report.events, 2);
        assert!(out.report.monotone);
        for (a, b) in out.map.depth.iter().zip(truth.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let pp = unwrap_per_pixel(&w, &c).unwrap();
        for (a, b) in pp.map.depth.iter().zip(truth.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn output_congruent_to_input_modulo_range() {
        let truth = ramp(120, 6, 0.3, 7.0);
        let (w, mut c) = maps(&truth, 2.5);
        c.depth.mapv_inplace(|d| d * 1.07 + 0.2);
        let line = CalibrationLine::segment((0, 2), (119, 2)).unwrap();
        for out in [unwrap_with_line(&w, &c, &line, 1).unwrap(), unwrap_per_pixel(&w, &c).unwrap()] {
            for (a, b) in out.map.depth.iter().zip(w.depth.iter()) {
                let k = (a - b) / 2.5;
                assert!((k - k.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn per_pixel_off_by_one_beyond_half_range() {
        let truth = ramp(10, 1, 0.5, 2.0);
        let (w, mut c) = maps(&truth, 2.5);
        c.depth[[3, 0]] += 1.3;
        let out = unwrap_per_pixel(&w, &c).unwrap();
        assert_eq!(out.counts[[3, 0]], 1);
        assert!((out.map.depth[[3, 0]] - truth[[3, 0]] - 2.5).abs() < 1e-12);
        c.depth[[3, 0]] -= 0.1;
        let out = unwrap_per_pixel(&w, &c).unwrap();
        assert_eq!(out.counts[[3, 0]], 0);
    }

    #[test]
    fn uncovered_depths_are_low_confidence() {
        let mut truth = ramp(100, 10, 0.5, 4.0);
        // an object deeper than anything on the line
        for x in 40..60 {
            for y in 0..4 {
                truth[[x, y]] = 5.8;
            }
        }
        let (w, c) = maps(&truth, 2.5);
        let line = CalibrationLine::segment((0, 8), (99, 8)).unwrap();
        let out = unwrap_with_line(&w, &c, &line, 0).unwrap();
        assert!(out.map.low_confidence[[50, 1]]);
        assert!(!out.map.low_confidence[[50, 8]]);
        assert_ne!(out.map.depth[[50, 1]], 5.8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let truth = ramp(20, 4, 0.5, 3.0);
        let (w, mut c) = maps(&truth, 2.5);
        let line = CalibrationLine::segment((0, 1), (19, 1)).unwrap();
        assert!(unwrap_with_line(&c, &c, &line, 0).is_err());
        assert!(unwrap_with_line(&w, &w, &line, 0).is_err());
        let off = CalibrationLine::segment((0, 1), (25, 1)).unwrap();
        assert!(unwrap_with_line(&w, &c, &off, 0).is_err());
        for x in 0..15 {
            c.valid[[x, 1]] = false;
        }
        assert!(matches!(unwrap_with_line(&w, &c, &line, 0), Err(Error::CalibrationLine(_))));
    }

    #[test]
    fn non_monotone_corr_is_reported() {
        let truth = ramp(60, 3, 0.5, 4.0);
        let (w, mut c) = maps(&truth, 2.5);
        c.depth[[10, 1]] += 0.4;
        let line = CalibrationLine::segment((0, 1), (59, 1)).unwrap();
        let out = unwrap_with_line(&w, &c, &line, 0).unwrap();
        assert!(!out.report.monotone);
        assert_eq!(out.report.events, 1);
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn median_filter_ignores_invalid() {
        let depth = Array2::from_shape_fn((5, 5), |(x, y)| (x * 5 + y) as f64);
        let mut map = DepthMap::new(depth, Array2::ones((5, 5)), Array2::from_elem((5, 5), true), false, 5.0).unwrap();
        map.depth[[2, 2]] = 1000.0;
        let f = median_filter(&map, 1);
        assert_eq!(f.depth[[2, 2]], 13.0);
        map.valid[[0, 0]] = false;
        let f = median_filter(&map, 1);
        assert!(!f.valid[[0, 0]]);
        assert_eq!(f.depth[[0, 1]], 5.0);
    }
}
