//! Multilayer gray difference (MGD) saliency.
//!
//! `D(x, y) = sum_{R=1..N} S(d_R) * d_R^2` with `d_R = mu_E(R-1) - mu_E(R)`,
//! where `S` is the strict unit step. Only outward-decreasing ring profiles
//! contribute, so dark structures produce no response.
//!
//! Ring means are taken of `f - f(x, y)`. The differences `d_R` are unchanged
//! but a window of equal pixels yields exactly zero, whatever the level.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{pad_replicate, GrayFrame, SaliencyMap};
use crate::rings::RingFamily;

/// Unit step: 1 for strictly positive input, else 0.
#[inline]
pub fn step_gate(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// MGD contribution of a ring-mean profile `mu_E(0), mu_E(1), ...`.
#[inline]
pub fn mgd_from_means(means: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = means.into_iter();
    let Some(mut inner) = it.next() else {
        return 0.0;
    };
    let mut acc = 0.0;
    for outer in it {
        let d = inner - outer;
        acc += d * d * step_gate(d);
        inner = outer;
    }
    acc
}

/// MGD map with replicate-edge padding.
pub fn mgd_map(frame: &GrayFrame, family: &RingFamily) -> Result<SaliencyMap> {
    if family.max_radius() < 1 {
        return Err(Error::param("MGD needs a ring family with max radius >= 1"));
    }
    let r = family.max_radius() as usize;
    let (w, h) = (frame.width(), frame.height());
    let pw = w + 2 * r;
    let padded = pad_replicate(frame, r);
    // Flat offsets into the padded buffer, relative to the window centre.
    let rings: Vec<(Vec<isize>, f64)> = family.rings()[1..]
        .iter()
        .map(|ring| {
            let offsets = ring
                .members()
                .iter()
                .map(|&(di, dj)| di as isize * pw as isize + dj as isize)
                .collect();
            (offsets, ring.members().len() as f64)
        })
        .collect();

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let centre = ((y + r) * pw + x + r) as isize;
            let c = padded[centre as usize];
            let means = std::iter::once(0.0).chain(rings.iter().map(|(offsets, n)| {
                offsets.iter().map(|&d| padded[(centre + d) as usize] - c).sum::<f64>() / n
            }));
            *o = mgd_from_means(means);
        }
    });
    Ok(SaliencyMap::from_parts_unchecked(w, h, out))
}
