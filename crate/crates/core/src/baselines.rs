//! Classical comparison detectors: Top-Hat, Max-Median and DoG.
//!
//! Every output is clamped at 0 so one threshold sweep serves all methods.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{gaussian_blur, GrayFrame, SaliencyMap};

fn check_odd(name: &str, v: usize) -> Result<()> {
    if v < 3 || v.is_multiple_of(2) {
        return Err(Error::param(format!("{name} must be odd and >= 3, got {v}")));
    }
    Ok(())
}

/// Running min or max over a horizontal window of radius `r`, replicate edges.
fn row_extreme(frame: &GrayFrame, r: usize, pick: fn(f64, f64) -> f64) -> GrayFrame {
    let (w, h) = (frame.width(), frame.height());
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &frame.data()[y * w..(y + 1) * w];
        for (x, o) in row.iter_mut().enumerate() {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            // replicated samples never extend the range beyond the edge pixel
            *o = src[lo..=hi].iter().copied().reduce(pick).expect("non-empty window");
        }
    });
    GrayFrame::from_parts_unchecked(w, h, out)
}

/// Square min (`erode`) or max filter via two 1-D passes.
fn square_extreme(frame: &GrayFrame, r: usize, pick: fn(f64, f64) -> f64) -> GrayFrame {
    row_extreme(&row_extreme(frame, r, pick).transpose(), r, pick).transpose()
}

/// Grey opening with a flat `side x side` square.
pub fn opening(frame: &GrayFrame, side: usize) -> Result<GrayFrame> {
    check_odd("structuring element side", side)?;
    let r = side / 2;
    Ok(square_extreme(&square_extreme(frame, r, f64::min), r, f64::max))
}

/// White top-hat `f - open(f)`.
pub fn tophat(frame: &GrayFrame, se_side: usize) -> Result<SaliencyMap> {
    let open = opening(frame, se_side)?;
    frame.zip_map(&open, |f, o| (f - o).max(0.0))
}

fn median(buf: &mut [f64]) -> f64 {
    let mid = buf.len() / 2;
    *buf.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// `f` minus the largest of the four directional line medians of length `win`.
pub fn max_median(frame: &GrayFrame, win: usize) -> Result<SaliencyMap> {
    check_odd("max-median window", win)?;
    let r = (win / 2) as isize;
    let (w, h) = (frame.width(), frame.height());
    const DIRS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut buf = vec![0.0; win];
        for (x, o) in row.iter_mut().enumerate() {
            let (cx, cy) = (x as isize, y as isize);
            let estimate = DIRS
                .iter()
                .map(|&(dx, dy)| {
                    for (k, slot) in buf.iter_mut().enumerate() {
                        let t = k as isize - r;
                        *slot = frame.get_clamped(cx + t * dx, cy + t * dy);
                    }
                    median(&mut buf)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            *o = (frame.get(x, y) - estimate).max(0.0);
        }
    });
    Ok(SaliencyMap::from_parts_unchecked(w, h, out))
}

/// Difference of Gaussians `blur(f, sigma1) - blur(f, sigma2)`.
pub fn dog(frame: &GrayFrame, sigma1: f64, sigma2: f64) -> Result<SaliencyMap> {
    if !(sigma1 > 0.0 && sigma1 < sigma2 && sigma2.is_finite()) {
        return Err(Error::param(format!(
            "DoG needs 0 < sigma1 < sigma2, got {sigma1}, {sigma2}"
        )));
    }
    let a = gaussian_blur(frame, sigma1)?;
    let b = gaussian_blur(frame, sigma2)?;
    a.zip_map(&b, |p, q| (p - q).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    TopHat { se_side: usize },
    MaxMedian { win: usize },
    Dog { sigma1: f64, sigma2: f64 },
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::TopHat { .. } => "tophat",
            Baseline::MaxMedian { .. } => "maxmedian",
            Baseline::Dog { .. } => "dog",
        }
    }

    /// Default parameters for a method name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tophat" => Ok(Baseline::TopHat { se_side: 5 }),
            "maxmedian" => Ok(Baseline::MaxMedian { win: 5 }),
            "dog" => Ok(Baseline::Dog { sigma1: 1.0, sigma2: 2.5 }),
            other => Err(Error::param(format!("unknown baseline `{other}`"))),
        }
    }

    pub fn apply(&self, frame: &GrayFrame) -> Result<SaliencyMap> {
        match *self {
            Baseline::TopHat { se_side } => tophat(frame, se_side),
            Baseline::MaxMedian { win } => max_median(frame, win),
            Baseline::Dog { sigma1, sigma2 } => dog(frame, sigma1, sigma2),
        }
    }
}
