//! Hessian eigen-analysis with Gaussian second-derivative operators.
//!
//! Kernels are analytic samples of `G_xx`, `G_yy`, `G_xy` at integer offsets,
//! truncated at `ceil(3 sigma)` and not renormalised. `x` is the column
//! offset and `y` the row offset.
//!
//! The truncated samples do not sum to exactly zero, so derivatives are taken
//! of the frame relative to the centre pixel, `f - f(x, y)`. The operators
//! then annihilate constants exactly and commute with `f -> a f + b`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::image::{GrayFrame, Kernel};

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeKernelSet {
    pub sigma: f64,
    pub gxx: Kernel,
    pub gyy: Kernel,
    pub gxy: Kernel,
}

/// Kernel side `2 ceil(3 sigma) + 1`, at least 5.
pub fn derivative_side(sigma: f64) -> usize {
    (2 * (3.0 * sigma).ceil() as usize + 1).max(5)
}

pub fn derivative_kernels(sigma: f64) -> Result<DerivativeKernelSet> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("derivative sigma must be positive, got {sigma}")));
    }
    let radius = derivative_side(sigma) / 2;
    let s2 = sigma * sigma;
    let g = move |x: f64, y: f64| (-(x * x + y * y) / (2.0 * s2)).exp();
    let gxx = Kernel::from_fn(radius, |dx, dy| {
        let (x, y) = (dx as f64, dy as f64);
        -(1.0 - x * x / s2) * g(x, y) / (2.0 * PI * s2 * s2)
    });
    let gxy = Kernel::from_fn(radius, |dx, dy| {
        let (x, y) = (dx as f64, dy as f64);
        x * y * g(x, y) / (2.0 * PI * s2 * s2 * s2)
    });
    let gyy = gxx.transpose();
    Ok(DerivativeKernelSet { sigma, gxx, gyy, gxy })
}

/// Eigenvalues `(lambda1, lambda2)` of `[[fxx, fxy], [fxy, fyy]]`, `lambda1 >= lambda2`.
#[inline]
pub fn eigenvalues(fxx: f64, fyy: f64, fxy: f64) -> (f64, f64) {
    let trace = fxx + fyy;
    let disc = ((fxx - fyy).powi(2) + 4.0 * fxy * fxy).sqrt();
    ((trace + disc) / 2.0, (trace - disc) / 2.0)
}

/// `min(|l1|, |l2|) / max(|l1|, |l2|)`; 0 when both vanish.
#[inline]
pub fn isotropy(lambda1: f64, lambda2: f64) -> f64 {
    let (a, b) = (lambda1.abs(), lambda2.abs());
    let hi = a.max(b);
    if hi == 0.0 {
        0.0
    } else {
        a.min(b) / hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianSample {
    pub fxx: f64,
    pub fyy: f64,
    pub fxy: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub isotropy: f64,
}

impl HessianSample {
    pub fn from_derivatives(fxx: f64, fyy: f64, fxy: f64) -> Self {
        let (lambda1, lambda2) = eigenvalues(fxx, fyy, fxy);
        Self {
            fxx,
            fyy,
            fxy,
            lambda1,
            lambda2,
            isotropy: isotropy(lambda1, lambda2),
        }
    }

    /// Both eigenvalues strictly negative: a bright cap.
    pub fn is_negative_definite(&self) -> bool {
        self.lambda1 < 0.0 && self.lambda2 < 0.0
    }
}

/// Hessian of the Gaussian-smoothed frame at `(x, y)`, replicate borders.
pub fn hessian_at(frame: &GrayFrame, x: usize, y: usize, kernels: &DerivativeKernelSet) -> HessianSample {
    HessianSample::from_derivatives(
        correlate_centered(frame, &kernels.gxx, x, y),
        correlate_centered(frame, &kernels.gyy, x, y),
        correlate_centered(frame, &kernels.gxy, x, y),
    )
}

fn correlate_centered(frame: &GrayFrame, kernel: &Kernel, x: usize, y: usize) -> f64 {
    let c = frame.get(x, y);
    let (cx, cy) = (x as isize, y as isize);
    kernel.taps().fold(0.0, |acc, (dx, dy, wt)| {
        acc + wt * (frame.get_clamped(cx + dx as isize, cy + dy as isize) - c)
    })
}

/// Derivative kernels shared across candidates, keyed by sigma quantised to 1e-3.
///
/// The kernels are built from the quantised sigma, so the result never
/// depends on which caller populated an entry first.
#[derive(Debug, Default)]
pub struct KernelCache {
    entries: RwLock<HashMap<i64, Arc<DerivativeKernelSet>>>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn quantize(sigma: f64) -> f64 {
        (sigma * 1000.0).round() / 1000.0
    }

    pub fn get(&self, sigma: f64) -> Result<Arc<DerivativeKernelSet>> {
        let key = (sigma * 1000.0).round() as i64;
        if let Some(k) = self.entries.read().expect("kernel cache poisoned").get(&key) {
            return Ok(Arc::clone(k));
        }
        let built = Arc::new(derivative_kernels(key as f64 / 1000.0)?);
        let mut w = self.entries.write().expect("kernel cache poisoned");
        Ok(Arc::clone(w.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("kernel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
