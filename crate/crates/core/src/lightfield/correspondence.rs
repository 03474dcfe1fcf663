//! Coarse depth from cross-view albedo consistency.
//!
//! For each candidate shear the views are aligned and the per-pixel albedo
//! variance across views is box-averaged over a small window. The candidate
//! with the smallest windowed variance wins. Disparity is independent of the
//! modulation frequency, so this depth never wraps.

use ndarray::Array2;
use rayon::prelude::*;

use super::{bilinear_taps, Shear};
use crate::config::CameraArrayConfig;
use crate::error::{Error, Result};
use crate::field::{DepthField, DepthMap};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_CANDIDATES: usize = 64;

/// Pixels whose variance contrast `1 - min / mean` falls below this are
/// flagged low-confidence.
pub const LOW_CONFIDENCE_CONTRAST: f64 = 0.01;

/// Variances within this relative distance of the minimum count as ties.
const TIE_TOLERANCE: f64 = 1e-9;

/// Windowed variances below this are rounding noise and compare equal.
const VARIANCE_FLOOR: f64 = 1e-20;

/// `n` shears uniformly spaced in disparity between the depths `dmin` and
/// `dmax`, nearest depth first.
pub fn candidate_shears(config: &CameraArrayConfig, dmin: f64, dmax: f64, n: usize) -> Result<Vec<Shear>> {
    if !(dmin > 0.0 && dmax > dmin) {
        return Err(Error::InvalidArgument(format!("need 0 < dmin < dmax, got {dmin}..{dmax}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two candidates".into()));
    }
    let hi = config.disparity_u(dmin);
    let lo = config.disparity_u(dmax);
    Ok((0..n).map(|i| Shear::new(hi + (lo - hi) * i as f64 / (n - 1) as f64)).collect())
}

#[derive(Debug, Clone)]
pub struct CorrespondenceDepth {
    /// Depth on the center-view grid; `low_confidence` marks flat variance
    /// curves.
    pub map: DepthMap,
    /// Variance contrast `1 - min / mean` over candidates, in `[0, 1]`.
    pub confidence: Array2<f64>,
    /// Index of the winning candidate, meaningful where `map.valid`.
    pub choice: Array2<usize>,
}

/// Per-pixel albedo variance across sheared views; `None` where fewer than
/// two views contribute.
fn view_variance(field: &DepthField, s: Shear) -> Array2<Option<f64>> {
    let cfg = &field.config;
    let (nu, nv, nx, ny) = field.dim();
    let mut out = Array2::from_elem((nx, ny), None);
    let mut samples = Vec::with_capacity(nu * nv);
    for x in 0..nx {
        for y in 0..ny {
            samples.clear();
            for u in 0..nu {
                for v in 0..nv {
                    let (dx, dy) = s.offsets(cfg, u, v);
                    let Some(t) = bilinear_taps(x as f64 + dx, y as f64 + dy, nx, ny) else { continue };
                    if (0..t.n).any(|i| !field.valid[[u, v, t.idx[i].0, t.idx[i].1]]) {
                        continue;
                    }
                    samples.push((0..t.n).map(|i| t.w[i] * field.albedo[[u, v, t.idx[i].0, t.idx[i].1]]).sum::<f64>());
                }
            }
            if samples.len() >= 2 {
                let n = samples.len() as f64;
                let mean = samples.iter().sum::<f64>() / n;
                let var = samples.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
                out[[x, y]] = Some(var);
            }
        }
    }
    out
}

/// Box mean of the defined entries in a `window x window` neighborhood.
fn window_mean(var: &Array2<Option<f64>>, window: usize) -> Array2<Option<f64>> {
    let (nx, ny) = var.dim();
    let r = (window / 2) as isize;
    Array2::from_shape_fn((nx, ny), |(x, y)| {
        var[[x, y]]?;
        let mut sum = 0.0;
        let mut n = 0usize;
        for dx in -r..=r {
            for dy in -r..=r {
                let (i, j) = (x as isize + dx, y as isize + dy);
                if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                    continue;
                }
                if let Some(v) = var[[i as usize, j as usize]] {
                    sum += v;
                    n += 1;
                }
            }
        }
        Some(sum / n as f64)
    })
}

/// Coarse, wrap-free depth for every center-view pixel.
///
/// Ties (within a relative `1e-9`) go to the candidate with the smallest
/// depth. A textureless surface ties everywhere and comes back flagged
/// low-confidence.
pub fn depth_from_correspondence(field: &DepthField, candidates: &[Shear], window: usize) -> Result<CorrespondenceDepth> {
    let cfg = &field.config;
    if cfg.views() < 2 {
        return Err(Error::InvalidArgument("correspondence needs at least two views".into()));
    }
    if candidates.len() < 2 {
        return Err(Error::InvalidArgument("correspondence needs at least two candidate shears".into()));
    }
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("window must be odd, got {window}")));
    }
    for s in candidates {
        s.check(cfg)?;
        if !(s.slope > 0.0) {
            return Err(Error::InvalidArgument(format!("candidate slope {} does not map to a finite depth", s.slope)));
        }
    }
    let depths: Vec<f64> = candidates.iter().map(|s| s.depth(cfg)).collect();

    let costs: Vec<Array2<Option<f64>>> = candidates
        .par_iter()
        .map(|s| window_mean(&view_variance(field, *s), window))
        .collect();

    let (_, _, nx, ny) = field.dim();
    let (cu, cv) = cfg.center_view_index();
    let mut depth = Array2::zeros((nx, ny));
    let mut valid = Array2::from_elem((nx, ny), false);
    let mut confidence = Array2::zeros((nx, ny));
    let mut choice = Array2::zeros((nx, ny));
    for x in 0..nx {
        for y in 0..ny {
            let defined: Vec<(usize, f64)> = costs.iter().enumerate().filter_map(|(i, c)| c[[x, y]].map(|v| (i, v))).collect();
            if defined.is_empty() {
                continue;
            }
            let min = defined.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            let cut = (min + min * TIE_TOLERANCE).max(VARIANCE_FLOOR);
            let (best, _) = defined
                .iter()
                .filter(|(_, v)| *v <= cut)
                .map(|(i, _)| (*i, depths[*i]))
                .fold((usize::MAX, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
            let mean = defined.iter().map(|(_, v)| *v).sum::<f64>() / defined.len() as f64;
            depth[[x, y]] = depths[best];
            valid[[x, y]] = true;
            choice[[x, y]] = best;
            confidence[[x, y]] = if mean > VARIANCE_FLOOR { (1.0 - min / mean).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    let albedo = field.albedo.slice(ndarray::s![cu, cv, .., ..]).to_owned();
    let mut map = DepthMap::new(depth, albedo, valid.clone(), false, cfg.unambiguous_range())?;
    map.low_confidence = ndarray::Zip::from(&confidence).and(&valid).map_collect(|c, ok| *ok && *c < LOW_CONFIDENCE_CONTRAST);
    Ok(CorrespondenceDepth { map, confidence, choice })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{render_ground_truth, Primitive, Scene, Texture};

    fn config() -> CameraArrayConfig {
        CameraArrayConfig { nu: 3, nv: 3, nx: 40, ny: 30, ..Default::default() }
    }

    fn plane(depth: f64, texture: Texture) -> Scene {
        Scene::new(vec![Primitive::Rect { center: [0.0, 0.0], size: [20.0, 20.0], depth, texture, cutout: None }])
    }

    #[test]
    fn candidates_span_range() {
        let cfg = config();
        let c = candidate_shears(&cfg, 1.0, 4.0, 5).unwrap();
        assert!((c[0].depth(&cfg) - 1.0).abs() < 1e-12);
        assert!((c[4].depth(&cfg) - 4.0).abs() < 1e-12);
        assert!(candidate_shears(&cfg, 4.0, 1.0, 5).is_err());
        assert!(candidate_shears(&cfg, 1.0, 4.0, 1).is_err());
    }

    #[test]
    fn textureless_plane_ties_to_nearest_candidate() {
        let cfg = config();
        let truth = render_ground_truth(&plane(2.0, Texture::Constant { value: 0.5 }), &cfg).unwrap();
        let cands = candidate_shears(&cfg, 1.0, 4.0, 8).unwrap();
        let out = depth_from_correspondence(&truth.field, &cands, 3).unwrap();
        for ((d, ok), low) in out.map.depth.iter().zip(out.map.valid.iter()).zip(out.map.low_confidence.iter()) {
            if *ok {
                assert!((d - 1.0).abs() < 1e-12);
                assert!(*low);
            }
        }
    }

    #[test]
    fn textured_plane_recovers_depth() {
        let cfg = config();
        let tex = Texture::Noise { cell: 0.02, low: 0.1, high: 1.0, seed: 3, octaves: 2 };
        let cands = candidate_shears(&cfg, 1.0, 4.0, 16).unwrap();
        let d = cands[9].depth(&cfg);
        let truth = render_ground_truth(&plane(d, tex), &cfg).unwrap();
        let out = depth_from_correspondence(&truth.field, &cands, 5).unwrap();
        let hits = out.map.depth.iter().filter(|v| (**v - d).abs() < 1e-9).count();
        assert!(hits as f64 >= 0.95 * out.map.valid_count() as f64);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let cfg = config();
        let truth = render_ground_truth(&plane(2.0, Texture::Constant { value: 0.5 }), &cfg).unwrap();
        let cands = candidate_shears(&cfg, 1.0, 4.0, 8).unwrap();
        assert!(depth_from_correspondence(&truth.field, &cands[..1], 3).is_err());
        assert!(depth_from_correspondence(&truth.field, &cands, 4).is_err());
        let single = render_ground_truth(&plane(2.0, Texture::Constant { value: 0.5 }), &cfg.with_views(1, 1)).unwrap();
        assert!(depth_from_correspondence(&single.field, &cands, 3).is_err());
    }
}
