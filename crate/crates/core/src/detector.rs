//! End-to-end detection.
//!
//! 1. MGD saliency `D`.
//! 2. Otsu threshold `TH_A` on `D`; pixels with `D <= TH_A` are dropped.
//! 3. At every remaining pixel: estimate the local Gaussian scale, take the
//!    Hessian with matched derivative kernels and keep
//!    `D * I * S(-lambda1) * S(-lambda2)`.
//! 4. Segment the constrained map at `mu + k sigma` and report the
//!    value-weighted centroid of every 8-connected component.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{GrayFrame, SaliencyMap};
use crate::isotropy::{hessian_at, HessianSample, KernelCache};
use crate::kv;
use crate::mgd::{mgd_map, step_gate};
use crate::rings::RingFamily;
use crate::scale::{estimate_sigma, radial_profile_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Outermost MGD ring; 4 gives the 9x9 window.
    pub ring_radius: u32,
    /// Scale-estimation rings `n`; background is ring `n + 1`.
    pub scale_rings: u32,
    /// Bounds applied to a valid scale estimate before building kernels.
    pub sigma_clamp: (f64, f64),
    /// `k` of the final `mu + k sigma` segmentation.
    pub segment_k: f64,
    pub connectivity: Connectivity,
    pub otsu_bins: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            ring_radius: 4,
            scale_rings: 3,
            sigma_clamp: (0.5, 4.0),
            segment_k: 5.0,
            connectivity: Connectivity::Eight,
            otsu_bins: 256,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale_rings < 1 {
            return Err(Error::param("scale_rings must be >= 1"));
        }
        if self.ring_radius < self.scale_rings + 1 {
            return Err(Error::param(format!(
                "ring_radius ({}) must be >= scale_rings + 1 ({})",
                self.ring_radius,
                self.scale_rings + 1
            )));
        }
        let (lo, hi) = self.sigma_clamp;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::param(format!("bad sigma clamp [{lo}, {hi}]")));
        }
        if !(self.segment_k > 0.0 && self.segment_k.is_finite()) {
            return Err(Error::param("segment_k must be positive"));
        }
        if self.otsu_bins < 2 {
            return Err(Error::param("otsu_bins must be >= 2"));
        }
        Ok(())
    }

    /// Parses the flat config format; missing keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let blocks = kv::parse(text)?;
        if let Some(b) = blocks.get(1) {
            return Err(Error::Config {
                line: b.line,
                msg: "detector config takes no blocks".into(),
            });
        }
        let mut r = kv::Reader::new(&blocks[0]);
        let d = Self::default();
        let connectivity = match r.get_or("connectivity", 8u32)? {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            other => return Err(Error::param(format!("connectivity must be 4 or 8, got {other}"))),
        };
        let cfg = Self {
            ring_radius: r.get_or("ring_radius", d.ring_radius)?,
            scale_rings: r.get_or("scale_rings", d.scale_rings)?,
            sigma_clamp: (
                r.get_or("sigma_clamp_low", d.sigma_clamp.0)?,
                r.get_or("sigma_clamp_high", d.sigma_clamp.1)?,
            ),
            segment_k: r.get_or("segment_k", d.segment_k)?,
            connectivity,
            otsu_bins: r.get_or("otsu_bins", d.otsu_bins)?,
        };
        r.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully resolved config in the same format [`Self::from_kv_str`] reads.
    pub fn to_kv_string(&self) -> String {
        format!(
            "ring_radius = {}\nscale_rings = {}\nsigma_clamp_low = {}\nsigma_clamp_high = {}\nsegment_k = {}\nconnectivity = {}\notsu_bins = {}\n",
            self.ring_radius,
            self.scale_rings,
            self.sigma_clamp.0,
            self.sigma_clamp.1,
            self.segment_k,
            match self.connectivity {
                Connectivity::Four => 4,
                Connectivity::Eight => 8,
            },
            self.otsu_bins
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Column of the value-weighted centroid.
    pub x: f64,
    /// Row of the value-weighted centroid.
    pub y: f64,
    /// Peak map value inside the component.
    pub score: f64,
    /// Component size in pixels.
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub frame_id: u32,
    /// Sorted by descending score.
    pub detections: Vec<Detection>,
}

/// Otsu threshold of `map` over `bins` equal-width bins spanning `[min, max]`.
///
/// Returns the upper edge of the bin that maximises the between-class
/// variance (lowest edge on ties). A map with fewer than two distinct values
/// returns its maximum, which no pixel strictly exceeds.
pub fn otsu_threshold(map: &SaliencyMap, bins: usize) -> f64 {
    let (lo, hi) = map.min_max();
    if !(hi > lo) || bins < 2 {
        return hi;
    }
    let width = (hi - lo) / bins as f64;
    let mut count = vec![0u64; bins];
    let mut sum = vec![0.0f64; bins];
    for &v in map.data() {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        count[b] += 1;
        sum[b] += v;
    }
    let total_n = map.len() as f64;
    let total_s: f64 = sum.iter().sum();

    let (mut n0, mut s0) = (0.0f64, 0.0f64);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for k in 0..bins - 1 {
        n0 += count[k] as f64;
        s0 += sum[k];
        let n1 = total_n - n0;
        if n0 == 0.0 || n1 == 0.0 {
            continue;
        }
        let gap = s0 / n0 - (total_s - s0) / n1;
        let between = n0 * n1 * gap * gap;
        if between > best.0 {
            best = (between, k);
        }
    }
    lo + (best.1 + 1) as f64 * width
}

/// Per-candidate diagnostics of the isotropic constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub x: usize,
    pub y: usize,
    pub mgd: f64,
    /// Clamped scale estimate; `None` when the profile is not target-like.
    pub sigma: Option<f64>,
    pub hessian: Option<HessianSample>,
    /// Constrained response `D * I * S(-l1) * S(-l2)`, 0 when invalid.
    pub response: f64,
}

/// Evaluates the isotropic constraint at single pixels of one frame.
pub struct CandidateEvaluator<'a> {
    frame: &'a GrayFrame,
    config: &'a DetectorConfig,
    family: RingFamily,
    cache: KernelCache,
}

impl<'a> CandidateEvaluator<'a> {
    pub fn new(frame: &'a GrayFrame, config: &'a DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            frame,
            config,
            family: RingFamily::new(config.scale_rings + 1),
            cache: KernelCache::new(),
        })
    }

    /// Scale, Hessian and constrained response at `(x, y)` given its MGD value.
    pub fn evaluate(&self, x: usize, y: usize, mgd: f64) -> Result<CandidateRecord> {
        let profile = radial_profile_with(
            &self.family,
            self.frame,
            x,
            y,
            self.config.scale_rings as usize,
        )?;
        let (lo, hi) = self.config.sigma_clamp;
        let sigma = estimate_sigma(&profile).clamped(lo, hi);
        let hessian = match sigma {
            Some(s) => Some(hessian_at(self.frame, x, y, &*self.cache.get(s)?)),
            None => None,
        };
        let response = hessian.map_or(0.0, |h| {
            mgd * h.isotropy * step_gate(-h.lambda1) * step_gate(-h.lambda2)
        });
        Ok(CandidateRecord {
            x,
            y,
            mgd,
            sigma,
            hessian,
            response,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintOutput {
    pub map: SaliencyMap,
    /// Otsu gate `TH_A` on the MGD map.
    pub threshold: f64,
    /// Every pixel with `D > TH_A`, in raster order.
    pub candidates: Vec<CandidateRecord>,
}

pub fn apply_isotropic_constraint(
    frame: &GrayFrame,
    d: &SaliencyMap,
    config: &DetectorConfig,
) -> Result<SaliencyMap> {
    Ok(apply_isotropic_constraint_detailed(frame, d, config)?.map)
}

pub fn apply_isotropic_constraint_detailed(
    frame: &GrayFrame,
    d: &SaliencyMap,
    config: &DetectorConfig,
) -> Result<ConstraintOutput> {
    frame.check_same_dims(d)?;
    let evaluator = CandidateEvaluator::new(frame, config)?;
    let threshold = otsu_threshold(d, config.otsu_bins);
    let w = frame.width();
    let above: Vec<usize> = d
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect();
    let candidates = above
        .par_iter()
        .map(|&i| evaluator.evaluate(i % w, i / w, d.data()[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; frame.len()];
    for c in &candidates {
        out[c.y * w + c.x] = c.response;
    }
    Ok(ConstraintOutput {
        map: SaliencyMap::from_parts_unchecked(w, frame.height(), out),
        threshold,
        candidates,
    })
}

/// `mu + k sigma` of the whole map (population statistics, zeros included).
///
/// Returns `None` for a map without positive values.
pub fn segmentation_threshold(map: &SaliencyMap, k: f64) -> Option<f64> {
    if !map.data().iter().any(|&v| v > 0.0) {
        return None;
    }
    let n = map.len() as f64;
    let mean = map.data().iter().sum::<f64>() / n;
    let var = map.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(mean + k * var.sqrt())
}

/// Connected components of `map > threshold`, sorted by descending score.
///
/// Centroids are weighted by map value; a component whose weights do not
/// sum to a positive number falls back to the unweighted mean position.
pub fn extract_components(
    map: &SaliencyMap,
    threshold: f64,
    connectivity: Connectivity,
) -> Vec<Detection> {
    let (w, h) = (map.width(), map.height());
    let data = map.data();
    let mut seen = vec![false; data.len()];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let neighbours: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
        Connectivity::Eight => &[
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ],
    };

    for start in 0..data.len() {
        if seen[start] || !(data[start] > threshold) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut sw, mut swx, mut swy) = (0.0, 0.0, 0.0);
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut score = f64::NEG_INFINITY;
        let mut pixels = 0usize;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let v = data[i];
            pixels += 1;
            score = score.max(v);
            sw += v;
            swx += v * x as f64;
            swy += v * y as f64;
            sx += x as f64;
            sy += y as f64;
            for &(dx, dy) in neighbours {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !seen[j] && data[j] > threshold {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        let (x, y) = if sw > 0.0 && sw.is_finite() {
            (swx / sw, swy / sw)
        } else {
            (sx / pixels as f64, sy / pixels as f64)
        };
        out.push(Detection { x, y, score, pixels });
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

pub fn segment_and_extract(dp: &SaliencyMap, config: &DetectorConfig) -> DetectionSet {
    let detections = match segmentation_threshold(dp, config.segment_k) {
        Some(t) => extract_components(dp, t, config.connectivity),
        None => Vec::new(),
    };
    DetectionSet {
        frame_id: 0,
        detections,
    }
}

/// Every stage of one detection run.
#[derive(Debug, Clone)]
pub struct DetectionOutput {
    pub mgd: SaliencyMap,
    pub constrained: SaliencyMap,
    pub otsu_threshold: f64,
    pub segmentation_threshold: Option<f64>,
    pub candidates: Vec<CandidateRecord>,
    pub detections: DetectionSet,
}

pub fn detect(frame: &GrayFrame, config: &DetectorConfig) -> Result<DetectionOutput> {
    config.validate()?;
    let mgd = mgd_map(frame, &RingFamily::new(config.ring_radius))?;
    let constraint = apply_isotropic_constraint_detailed(frame, &mgd, config)?;
    let detections = segment_and_extract(&constraint.map, config);
    Ok(DetectionOutput {
        segmentation_threshold: segmentation_threshold(&constraint.map, config.segment_k),
        mgd,
        constrained: constraint.map,
        otsu_threshold: constraint.threshold,
        candidates: constraint.candidates,
        detections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from(w: usize, h: usize, cells: &[((usize, usize), f64)]) -> SaliencyMap {
        SaliencyMap::from_fn(w, h, |x, y| {
            cells.iter().find(|(p, _)| *p == (x, y)).map_or(0.0, |c| c.1)
        })
    }

    /// Exhaustive Otsu over candidate edges using raw values, no histogram.
    fn oracle_otsu(values: &[f64], bins: usize) -> f64 {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let mut best = (f64::NEG_INFINITY, hi);
        for k in 0..bins - 1 {
            let edge = lo + (k + 1) as f64 * width;
            let (a, b): (Vec<f64>, Vec<f64>) = values.iter().partition(|&&v| v < edge);
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let var = a.len() as f64 * b.len() as f64 * (ma - mb).powi(2);
            if var > best.0 * (1.0 + 1e-12) {
                best = (var, edge);
            }
        }
        best.1
    }

    #[test]
    fn otsu_two_classes() {
        let m = SaliencyMap::from_fn(10, 10, |x, _| if x < 5 { 0.0 } else { 200.0 });
        let t = otsu_threshold(&m, 256);
        assert!(t > 0.0 && t <= 200.0);
        assert!(m.data().iter().all(|&v| (v == 0.0) == (v <= t)));
        assert!(m.data().iter().filter(|&&v| v > t).all(|&v| v == 200.0));
    }

    #[test]
    fn otsu_constant_map() {
        let m = SaliencyMap::constant(4, 4, 3.0);
        let t = otsu_threshold(&m, 256);
        assert_eq!(t, 3.0);
        assert!(m.data().iter().all(|&v| !(v > t)));
    }

    #[test]
    fn otsu_bimodal_matches_exhaustive_search() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (a, b) = (Normal::new(10.0, 5.0).unwrap(), Normal::new(100.0, 5.0).unwrap());
        let values: Vec<f64> = (0..4000)
            .map(|i| if i % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) })
            .collect();
        let m = SaliencyMap::new(80, 50, values.clone()).unwrap();
        let t = otsu_threshold(&m, 256);
        assert!(t > 25.0 && t < 85.0, "threshold {t}");
        let (lo, hi) = m.min_max();
        assert!((t - oracle_otsu(&values, 256)).abs() <= (hi - lo) / 256.0 + 1e-9);
    }

    #[test]
    fn components_and_centroids() {
        let m = map_from(12, 12, &[((5, 5), 10.0), ((5, 6), 30.0), ((9, 1), 4.0)]);
        let dets = extract_components(&m, 0.0, Connectivity::Eight);
        assert_eq!(dets.len(), 2);
        assert_eq!((dets[0].x, dets[0].y), (5.0, 5.75));
        assert_eq!(dets[0].score, 30.0);
        assert_eq!(dets[0].pixels, 2);
        assert_eq!((dets[1].x, dets[1].y, dets[1].pixels), (9.0, 1.0, 1));
    }

    #[test]
    fn diagonal_neighbours_join_only_with_eight_connectivity() {
        let m = map_from(6, 6, &[((1, 1), 1.0), ((2, 2), 1.0)]);
        assert_eq!(extract_components(&m, 0.0, Connectivity::Eight).len(), 1);
        assert_eq!(extract_components(&m, 0.0, Connectivity::Four).len(), 2);
    }

    #[test]
    fn segmentation_edge_cases() {
        let cfg = DetectorConfig::default();
        let empty = SaliencyMap::constant(16, 16, 0.0);
        assert!(segment_and_extract(&empty, &cfg).detections.is_empty());

        let single = map_from(40, 40, &[((10, 20), 7.0)]);
        let dets = segment_and_extract(&single, &cfg).detections;
        assert_eq!(dets.len(), 1);
        assert_eq!((dets[0].x, dets[0].y), (10.0, 20.0));
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = DetectorConfig {
            segment_k: 3.5,
            connectivity: Connectivity::Four,
            ..Default::default()
        };
        assert_eq!(DetectorConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
        assert_eq!(DetectorConfig::from_kv_str("# empty\n").unwrap(), DetectorConfig::default());
        assert!(DetectorConfig::from_kv_str("ring_radius = 3\nscale_rings = 3").is_err());
        assert!(DetectorConfig::from_kv_str("segment_k = -1").is_err());
        assert!(DetectorConfig::from_kv_str("bogus = 1").is_err());
        assert!(DetectorConfig::from_kv_str("connectivity = 6").is_err());
        assert!(DetectorConfig::from_kv_str("[x]\na = 1").is_err());
    }

    #[test]
    fn flat_frame_detects_nothing() {
        let f = GrayFrame::constant(32, 32, 80.0);
        let out = detect(&f, &DetectorConfig::default()).unwrap();
        assert!(out.detections.detections.is_empty());
        assert!(out.constrained.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constraint_never_increases_response() {
        let f = GrayFrame::from_fn(40, 40, |x, y| {
            let r2 = (x as f64 - 20.0).powi(2) + (y as f64 - 12.0).powi(2);
            30.0 * (-r2 / 3.0).exp() + 10.0 * (-((x as f64 - 8.0).powi(2)) / 2.0).exp() + ((x * 7 + y * 13) % 5) as f64
        });
        let out = detect(&f, &DetectorConfig::default()).unwrap();
        for (dp, d) in out.constrained.data().iter().zip(out.mgd.data()) {
            assert!(*dp >= 0.0 && dp <= d);
            if !(*d > out.otsu_threshold) {
                assert_eq!(*dp, 0.0);
            }
        }
        for c in &out.candidates {
            if let Some(h) = c.hessian {
                if !h.is_negative_definite() {
                    assert_eq!(c.response, 0.0);
                }
            } else {
                assert_eq!(c.response, 0.0);
            }
        }
    }
}
