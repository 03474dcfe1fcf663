//! Refocusing through partial occluders.
//!
//! TOF already measures a depth per ray, so foreground rays can be found by
//! clustering the depth histogram directly and dropped before averaging.

use std::path::Path;

use ndarray::{Array4, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::export::write_table;
use crate::field::DepthField;
use crate::lightfield::{refocus, RefocusMode, Refocused, Shear};

pub const DEFAULT_BINS: usize = 100;
pub const MAX_ITERATIONS: usize = 100;
/// Centroid movement (meters) below which k-means stops.
pub const CONVERGENCE: f64 = 1e-6;

const CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn bin_of(&self, depth: f64) -> Option<usize> {
        if !(depth >= self.lo && depth <= self.hi) {
            return None;
        }
        Some((((depth - self.lo) / self.bin_width()) as usize).min(self.counts.len() - 1))
    }

    /// Local maxima holding at least `min_fraction` of the tallest bin.
    /// Plateaus count once.
    pub fn peaks(&self, min_fraction: f64) -> Vec<usize> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let floor = (max as f64 * min_fraction).max(1.0);
        let n = self.counts.len();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            let c = self.counts[i];
            let mut j = i;
            while j + 1 < n && self.counts[j + 1] == c {
                j += 1;
            }
            let left = if i == 0 { 0 } else { self.counts[i - 1] };
            let right = if j + 1 == n { 0 } else { self.counts[j + 1] };
            if c as f64 >= floor && c > left && c > right {
                out.push((i + j) / 2);
            }
            i = j + 1;
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = self.bin_width();
        let rows: Vec<Vec<f64>> = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, c)| vec![self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w, *c as f64])
            .collect();
        write_table(path, &["bin_lo_m", "bin_hi_m", "count"], &rows)
    }
}

fn require_unwrapped(field: &DepthField) -> Result<()> {
    if field.wrapped {
        Err(Error::Wrapped)
    } else {
        Ok(())
    }
}

/// Counts valid per-ray depths in `bins` uniform bins over `range`. Depths
/// outside the range are skipped.
pub fn depth_histogram(field: &DepthField, bins: usize, range: (f64, f64)) -> Result<Histogram> {
    require_unwrapped(field)?;
    if bins == 0 || !(range.1 > range.0) {
        return Err(Error::InvalidArgument(format!("need bins >= 1 and an increasing range, got {bins} over {range:?}")));
    }
    if field.valid_count() == 0 {
        return Err(Error::NoValidRays);
    }
    let mut hist = Histogram { lo: range.0, hi: range.1, counts: vec![0; bins] };
    for (d, ok) in field.depth().iter().zip(field.valid.iter()) {
        if *ok {
            if let Some(b) = hist.bin_of(*d) {
                hist.counts[b] += 1;
            }
        }
    }
    Ok(hist)
}

/// Per-ray cluster labels (`-1` for invalid rays) and ascending centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Array4<i32>,
    pub centroids: Vec<f64>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each assignment step.
    pub objective: Vec<f64>,
}

impl Clustering {
    /// Rays belonging to `cluster`.
    pub fn mask(&self, cluster: usize) -> Array4<bool> {
        self.labels.mapv(|l| l == cluster as i32)
    }
}

/// 1D k-means result over a plain slice.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<f64>,
    pub iterations: usize,
    pub objective: Vec<f64>,
}

fn nearest_centroid(x: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = (x - c).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Lloyd's algorithm in one dimension with k-means++ seeding.
///
/// Reductions run over fixed-size chunks combined in order, so the result
/// does not depend on the thread count.
pub fn kmeans_1d(values: &[f64], k: usize, seed: u64) -> Result<KMeans> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::TooFewDistinct { distinct: distinct.len(), k });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![values[rng.random_range(0..values.len())]];
    let mut d2: Vec<f64> = values.iter().map(|v| (v - centroids[0]).powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|d| *d > 0.0).expect("k distinct values");
        for (i, d) in d2.iter().enumerate() {
            if *d > 0.0 && target < *d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = values[pick];
        centroids.push(c);
        for (d, v) in d2.iter_mut().zip(values) {
            *d = d.min((v - c).powi(2));
        }
    }

    let mut labels = vec![0usize; values.len()];
    let mut objective = Vec::new();
    let mut iterations = 0;
    loop {
        labels.par_iter_mut().zip(values.par_iter()).for_each(|(l, v)| *l = nearest_centroid(*v, &centroids));
        let partials: Vec<(Vec<f64>, Vec<usize>, f64)> = values
            .par_chunks(CHUNK)
            .zip(labels.par_chunks(CHUNK))
            .map(|(vs, ls)| {
                let mut sum = vec![0.0; k];
                let mut count = vec![0usize; k];
                let mut sse = 0.0;
                for (v, l) in vs.iter().zip(ls) {
                    sum[*l] += v;
                    count[*l] += 1;
                    sse += (v - centroids[*l]).powi(2);
                }
                (sum, count, sse)
            })
            .collect();
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        let mut sse = 0.0;
        for (s, c, e) in partials {
            for j in 0..k {
                sum[j] += s[j];
                count[j] += c[j];
            }
            sse += e;
        }
        objective.push(sse);
        iterations += 1;

        let mut moved: f64 = 0.0;
        for j in 0..k {
            let next = if count[j] > 0 {
                sum[j] / count[j] as f64
            } else {
                // re-seed an empty cluster at the worst-fit point
                let (i, _) = values
                    .iter()
                    .zip(&labels)
                    .map(|(v, l)| (v - centroids[*l]).abs())
                    .enumerate()
                    .fold((0, -1.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
                values[i]
            };
            moved = moved.max((next - centroids[j]).abs());
            centroids[j] = next;
        }
        if moved < CONVERGENCE || iterations >= MAX_ITERATIONS {
            break;
        }
    }
    labels.par_iter_mut().zip(values.par_iter()).for_each(|(l, v)| *l = nearest_centroid(*v, &centroids));

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| centroids[*a].total_cmp(&centroids[*b]));
    let mut rank = vec![0; k];
    for (r, j) in order.iter().enumerate() {
        rank[*j] = r;
    }
    let centroids = order.iter().map(|j| centroids[*j]).collect();
    let labels = labels.into_iter().map(|l| rank[l]).collect();
    Ok(KMeans { labels, centroids, iterations, objective })
}

/// Clusters all valid per-ray depths of an unwrapped field.
pub fn cluster_depths(field: &DepthField, k: usize, seed: u64) -> Result<Clustering> {
    require_unwrapped(field)?;
    let depth = field.depth();
    let values: Vec<f64> = depth.iter().zip(field.valid.iter()).filter(|(_, ok)| **ok).map(|(d, _)| *d).collect();
    if values.is_empty() {
        return Err(Error::NoValidRays);
    }
    let km = kmeans_1d(&values, k, seed)?;
    let mut labels = Array4::from_elem(field.dim(), -1);
    let mut next = km.labels.iter();
    Zip::from(&mut labels).and(&field.valid).for_each(|l, ok| {
        if *ok {
            *l = *next.next().expect("one label per valid ray") as i32;
        }
    });
    Ok(Clustering { labels, centroids: km.centroids, iterations: km.iterations, objective: km.objective })
}

#[derive(Debug, Clone)]
pub struct OccludedRefocus {
    pub refocused: Refocused,
    /// Rays excluded from the average.
    pub mask: Array4<bool>,
    pub foreground: usize,
    pub masked_rays: usize,
}

/// Refocuses `field` at `s` after dropping every ray labeled `foreground`
/// (default: the cluster with the smallest centroid).
pub fn refocus_without_foreground(
    field: &DepthField,
    clustering: &Clustering,
    foreground: Option<usize>,
    s: Shear,
    mode: RefocusMode,
) -> Result<OccludedRefocus> {
    require_unwrapped(field)?;
    if clustering.labels.dim() != field.dim() {
        return Err(Error::Shape("cluster labels do not match the field".into()));
    }
    let foreground = foreground.unwrap_or(0);
    if foreground >= clustering.centroids.len() {
        return Err(Error::InvalidArgument(format!("no cluster {foreground}; have {}", clustering.centroids.len())));
    }
    let mask = clustering.mask(foreground);
    let masked_rays = mask.iter().filter(|m| **m).count();
    let refocused = refocus(field, s, mode, Some(&mask))?;
    Ok(OccludedRefocus { refocused, mask, foreground, masked_rays })
}
