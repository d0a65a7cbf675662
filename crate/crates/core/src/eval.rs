//! SCR/SCRG, detection matching and ROC curves.
//!
//! `SCR = |I_t - mu_B| / sigma_B` where `I_t` is the maximum over a square
//! target box and `mu_B`, `sigma_B` are the mean and population standard
//! deviation of the surrounding frame of width `bg_width`, excluding the box.
//! A detection matches a truth when its rounded centroid falls in the 3x3
//! neighbourhood of the truth. `Pd` and `Pf` are averaged over frames; `Pf`
//! counts the pixels of unmatched detections over the frame area.

use rayon::prelude::*;

use crate::detector::{extract_components, Connectivity, Detection};
use crate::error::{Error, Result};
use crate::image::{GrayFrame, SaliencyMap};

pub const DEFAULT_TARGET_SIDE: usize = 5;
pub const DEFAULT_BG_WIDTH: usize = 10;
pub const DEFAULT_ROC_LEVELS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub frame_id: u32,
    pub targets: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrMeasurement {
    /// `+inf` when the background is constant.
    pub scr: f64,
    pub target_peak: f64,
    pub bg_mean: f64,
    pub bg_std: f64,
    pub bg_pixels: usize,
    /// Part of the target box or background frame fell outside the image.
    pub clipped: bool,
}

/// SCR of `map` around `gt` with a `target_side` box and `bg_width` frame.
pub fn scr(map: &GrayFrame, gt: (i64, i64), target_side: usize, bg_width: usize) -> Result<ScrMeasurement> {
    map.check_point(gt.0, gt.1)?;
    if target_side == 0 || target_side.is_multiple_of(2) {
        return Err(Error::param(format!("target side must be odd, got {target_side}")));
    }
    let t = (target_side / 2) as i64;
    let outer = t + bg_width as i64;
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut clipped = false;
    let mut peak = f64::NEG_INFINITY;
    let mut bg = Vec::new();
    for dy in -outer..=outer {
        for dx in -outer..=outer {
            let (x, y) = (gt.0 + dx, gt.1 + dy);
            if x < 0 || y < 0 || x >= w || y >= h {
                clipped = true;
                continue;
            }
            let v = map.get(x as usize, y as usize);
            if dx.abs() <= t && dy.abs() <= t {
                peak = peak.max(v);
            } else {
                bg.push(v);
            }
        }
    }
    if bg.is_empty() {
        return Err(Error::param("no background pixels inside the image"));
    }
    let n = bg.len() as f64;
    let mean = bg.iter().sum::<f64>() / n;
    let std = (bg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scr = if std == 0.0 {
        f64::INFINITY
    } else {
        (peak - mean).abs() / std
    };
    Ok(ScrMeasurement {
        scr,
        target_peak: peak,
        bg_mean: mean,
        bg_std: std,
        bg_pixels: bg.len(),
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub scr_in: f64,
    pub scr_out: f64,
    /// `scr_out / scr_in`; `None` when `scr_in` is 0 or the ratio is not a number.
    pub scrg: Option<f64>,
    pub input: ScrMeasurement,
    pub output: ScrMeasurement,
    pub target_side: usize,
    pub bg_width: usize,
}

pub fn scrg_ratio(scr_out: f64, scr_in: f64) -> Option<f64> {
    if scr_in == 0.0 {
        return None;
    }
    let r = scr_out / scr_in;
    (!r.is_nan()).then_some(r)
}

/// SCR of the input frame and of a filter output around the same truth.
pub fn scrg(input: &GrayFrame, output: &SaliencyMap, gt: (i64, i64)) -> Result<EvalReport> {
    scrg_with(input, output, gt, DEFAULT_TARGET_SIDE, DEFAULT_BG_WIDTH)
}

pub fn scrg_with(
    input: &GrayFrame,
    output: &SaliencyMap,
    gt: (i64, i64),
    target_side: usize,
    bg_width: usize,
) -> Result<EvalReport> {
    input.check_same_dims(output)?;
    let i = scr(input, gt, target_side, bg_width)?;
    let o = scr(output, gt, target_side, bg_width)?;
    Ok(EvalReport {
        scr_in: i.scr,
        scr_out: o.scr,
        scrg: scrg_ratio(o.scr, i.scr),
        input: i,
        output: o,
        target_side,
        bg_width,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// Matched truths `N_d`.
    pub matched: usize,
    /// Pixels of unmatched detections `N_f`.
    pub false_pixels: usize,
    /// Truth index matched by each detection, in input order.
    pub assignment: Vec<Option<usize>>,
}

/// Rounded centroid within the 3x3 neighbourhood of the truth.
pub fn within_match_window(det: (f64, f64), truth: (usize, usize)) -> bool {
    let (rx, ry) = (det.0.round(), det.1.round());
    (rx - truth.0 as f64).abs() <= 1.0 && (ry - truth.1 as f64).abs() <= 1.0
}

/// One-to-one greedy matching by descending score; each detection takes the
/// nearest free truth in its window.
pub fn match_detections(dets: &[Detection], gt: &GroundTruth) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&dets[a], &dets[b]);
        q.score
            .total_cmp(&p.score)
            .then(p.x.total_cmp(&q.x))
            .then(p.y.total_cmp(&q.y))
            .then(p.pixels.cmp(&q.pixels))
    });
    let mut taken = vec![false; gt.targets.len()];
    let mut assignment = vec![None; dets.len()];
    for i in order {
        let d = &dets[i];
        let best = gt
            .targets
            .iter()
            .enumerate()
            .filter(|&(j, &t)| !taken[j] && within_match_window((d.x, d.y), t))
            .min_by(|(_, a), (_, b)| {
                let da = (d.x - a.0 as f64).powi(2) + (d.y - a.1 as f64).powi(2);
                let db = (d.x - b.0 as f64).powi(2) + (d.y - b.1 as f64).powi(2);
                da.total_cmp(&db)
            })
            .map(|(j, _)| j);
        if let Some(j) = best {
            taken[j] = true;
            assignment[i] = Some(j);
        }
    }
    let false_pixels = dets
        .iter()
        .zip(&assignment)
        .filter(|(_, a)| a.is_none())
        .map(|(d, _)| d.pixels)
        .sum();
    MatchResult {
        matched: assignment.iter().flatten().count(),
        false_pixels,
        assignment,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pd: f64,
    pub pf: f64,
}

fn check_inputs(maps: &[SaliencyMap], gts: &[GroundTruth]) -> Result<()> {
    if maps.is_empty() {
        return Err(Error::param("ROC needs at least one map"));
    }
    if maps.len() != gts.len() {
        return Err(Error::param(format!(
            "{} maps but {} ground-truth frames",
            maps.len(),
            gts.len()
        )));
    }
    for (m, g) in maps.iter().zip(gts) {
        for &(x, y) in &g.targets {
            m.check_point(x as i64, y as i64)?;
        }
    }
    Ok(())
}

/// Frame-averaged `Pd` and `Pf` with segmentation at `value > threshold`.
///
/// Frames without targets do not enter the `Pd` average.
pub fn evaluate_threshold(maps: &[SaliencyMap], gts: &[GroundTruth], threshold: f64) -> Result<RocPoint> {
    check_inputs(maps, gts)?;
    Ok(evaluate_unchecked(maps, gts, threshold))
}

fn evaluate_unchecked(maps: &[SaliencyMap], gts: &[GroundTruth], threshold: f64) -> RocPoint {
    let per_frame: Vec<(Option<f64>, f64)> = maps
        .par_iter()
        .zip(gts)
        .map(|(m, g)| {
            let dets = extract_components(m, threshold, Connectivity::Eight);
            let r = match_detections(&dets, g);
            let pd = (!g.targets.is_empty()).then(|| r.matched as f64 / g.targets.len() as f64);
            (pd, r.false_pixels as f64 / m.len() as f64)
        })
        .collect();
    let pds: Vec<f64> = per_frame.iter().filter_map(|p| p.0).collect();
    let pd = if pds.is_empty() {
        0.0
    } else {
        pds.iter().sum::<f64>() / pds.len() as f64
    };
    let pf = per_frame.iter().map(|p| p.1).sum::<f64>() / per_frame.len() as f64;
    RocPoint { threshold, pd, pf }
}

/// Strictly descending sweep: `levels` quantiles of the pooled positive
/// values, then one threshold below the global minimum.
pub fn roc_thresholds(maps: &[SaliencyMap], levels: usize) -> Vec<f64> {
    let mut pos: Vec<f64> = maps
        .iter()
        .flat_map(|m| m.data().iter().copied())
        .filter(|&v| v > 0.0)
        .collect();
    pos.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(levels + 1);
    if !pos.is_empty() && levels > 0 {
        let last = pos.len() - 1;
        for i in 0..levels {
            let q = if levels == 1 { 1.0 } else { i as f64 / (levels - 1) as f64 };
            out.push(pos[(q * last as f64).round() as usize]);
        }
    }
    let global_min = maps
        .iter()
        .map(|m| m.min_max().0)
        .fold(f64::INFINITY, f64::min);
    out.push(global_min - 1.0);
    out.sort_by(|a, b| b.total_cmp(a));
    out.dedup();
    out
}

/// Raw sweep at the given thresholds, in order.
pub fn roc_sweep(maps: &[SaliencyMap], gts: &[GroundTruth], thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    check_inputs(maps, gts)?;
    Ok(thresholds
        .iter()
        .map(|&t| evaluate_unchecked(maps, gts, t))
        .collect())
}

/// Running maximum of `pd` and `pf` along a descending sweep.
pub fn monotone_envelope(points: &[RocPoint]) -> Vec<RocPoint> {
    let (mut pd, mut pf) = (0.0f64, 0.0f64);
    points
        .iter()
        .map(|p| {
            pd = pd.max(p.pd);
            pf = pf.max(p.pf);
            RocPoint { threshold: p.threshold, pd, pf }
        })
        .collect()
}

/// ROC over the default quantile sweep.
pub fn roc_curve(maps: &[SaliencyMap], gts: &[GroundTruth]) -> Result<Vec<RocPoint>> {
    check_inputs(maps, gts)?;
    roc_curve_with_thresholds(maps, gts, &roc_thresholds(maps, DEFAULT_ROC_LEVELS))
}

pub fn roc_curve_with_thresholds(
    maps: &[SaliencyMap],
    gts: &[GroundTruth],
    thresholds: &[f64],
) -> Result<Vec<RocPoint>> {
    let mut t = thresholds.to_vec();
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    Ok(monotone_envelope(&roc_sweep(maps, gts, &t)?))
}

/// Best `pd` among points with `pf <= max_pf`; 0 if none qualifies.
pub fn pd_at_pf(curve: &[RocPoint], max_pf: f64) -> f64 {
    curve
        .iter()
        .filter(|p| p.pf <= max_pf)
        .map(|p| p.pd)
        .fold(0.0, f64::max)
}
