//! Frame representation and the shared 2-D correlation engine.
//!
//! All filtering in this crate is *correlation* (the kernel is not flipped)
//! with replicate-edge padding, and the output has the input's dimensions.
//! Map-producing operations split output rows across rayon workers; every
//! pixel is accumulated in a fixed tap order so the result is bitwise
//! identical for any thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major grayscale raster of finite `f64` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Real-valued per-pixel response map. Shares the frame representation so
/// maps and frames can be fed to the same filters and metrics.
pub type SaliencyMap = GrayFrame;

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFrame(format!(
                "non-finite intensity at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant frame. Panics on zero dimensions or a non-finite value.
    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid constant frame")
    }

    /// Builds a frame from `f(x, y)`. Panics if `f` yields a non-finite value.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        Self::new(width, height, data).expect("from_fn produced an invalid frame")
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels, `width * height`.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with replicate-edge extension outside the frame.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub(crate) fn check_point(&self, x: i64, y: i64) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x,
                y,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// `(min, max)` over all pixels.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Applies `f` pixelwise. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::new(self.width, self.height, data).expect("map produced a non-finite value")
    }

    /// Combines two equally sized frames pixelwise.
    pub fn zip_map(&self, other: &GrayFrame, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.width, self.height, data)
    }

    pub(crate) fn check_same_dims(&self, other: &GrayFrame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::InvalidFrame(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Swaps the axes: output `(x, y)` holds input `(y, x)`.
    pub fn transpose(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_parts_unchecked(h, w, (0..w * h).map(|i| self.get(i / h, i % h)).collect())
    }

    /// Rotates the raster a quarter turn: output `(x, y)` holds input
    /// `(y, height - 1 - x)`.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_parts_unchecked(
            h,
            w,
            (0..w * h).map(|i| self.get(i / h, h - 1 - i % h)).collect(),
        )
    }
}

/// Square correlation mask with odd side and the anchor at its center.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    side: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(side: usize, weights: Vec<f64>) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!("side must be odd, got {side}")));
        }
        if weights.len() != side * side {
            return Err(Error::InvalidKernel(format!(
                "expected {} weights for side {side}, got {}",
                side * side,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidKernel("non-finite weight".into()));
        }
        Ok(Self { side, weights })
    }

    /// 1x1 kernel holding a single 1.
    pub fn identity() -> Self {
        Self {
            side: 1,
            weights: vec![1.0],
        }
    }

    /// Kernel of side `2 * radius + 1` with weight `f(dx, dy)` at column
    /// offset `dx` and row offset `dy`.
    pub fn from_fn(radius: usize, f: impl Fn(i32, i32) -> f64) -> Self {
        let side = 2 * radius + 1;
        let r = radius as i32;
        let weights = (0..side * side)
            .map(|i| f((i % side) as i32 - r, (i / side) as i32 - r))
            .collect();
        Self::new(side, weights).expect("from_fn produced an invalid kernel")
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.side / 2
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at column offset `dx`, row offset `dy` from the anchor.
    pub fn weight(&self, dx: i32, dy: i32) -> f64 {
        let r = self.radius() as i32;
        assert!(dx.abs() <= r && dy.abs() <= r, "offset outside kernel");
        self.weights[((dy + r) as usize) * self.side + (dx + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let s = self.side;
        Self {
            side: s,
            weights: (0..s * s).map(|i| self.weights[(i % s) * s + i / s]).collect(),
        }
    }

    /// Nonzero taps as `(dx, dy, weight)` in row-major order. This is the
    /// accumulation order of every correlation in the crate.
    pub fn taps(&self) -> impl Iterator<Item = (i32, i32, f64)> + '_ {
        let r = self.radius() as i32;
        let s = self.side;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(move |(i, &w)| ((i % s) as i32 - r, (i / s) as i32 - r, w))
    }
}

/// Correlates `frame` with `kernel` using replicate-edge padding.
pub fn convolve(frame: &GrayFrame, kernel: &Kernel) -> GrayFrame {
    let r = kernel.radius();
    let (w, h) = (frame.width(), frame.height());
    let pw = w + 2 * r;
    let padded = pad_replicate(frame, r);
    let taps: Vec<(usize, usize, f64)> = kernel
        .taps()
        .map(|(dx, dy, wt)| ((dx + r as i32) as usize, (dy + r as i32) as usize, wt))
        .collect();

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for &(kx, ky, wt) in &taps {
            let src = &padded[(y + ky) * pw + kx..][..w];
            for (o, &s) in row.iter_mut().zip(src) {
                *o += wt * s;
            }
        }
    });
    GrayFrame::from_parts_unchecked(w, h, out)
}

/// Single-point correlation of `kernel` centred at `(x, y)`. Produces the
/// same value as [`convolve`] at that pixel.
pub fn correlate_at(frame: &GrayFrame, kernel: &Kernel, x: usize, y: usize) -> f64 {
    let (cx, cy) = (x as isize, y as isize);
    kernel.taps().fold(0.0, |acc, (dx, dy, wt)| {
        acc + wt * frame.get_clamped(cx + dx as isize, cy + dy as isize)
    })
}

pub(crate) fn pad_replicate(frame: &GrayFrame, r: usize) -> Vec<f64> {
    let (w, h) = (frame.width(), frame.height());
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut padded = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let sy = (py as isize - r as isize).clamp(0, h as isize - 1) as usize;
        let row = &frame.data()[sy * w..(sy + 1) * w];
        padded.extend(std::iter::repeat_n(row[0], r));
        padded.extend_from_slice(row);
        padded.extend(std::iter::repeat_n(row[w - 1], r));
    }
    padded
}

/// Normalised 1-D Gaussian truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel_1d(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Separable Gaussian blur (normalised, truncated at 3 sigma, replicate edges).
pub fn gaussian_blur(frame: &GrayFrame, sigma: f64) -> Result<GrayFrame> {
    let taps = gaussian_kernel_1d(sigma)?;
    Ok(convolve_separable(frame, &taps))
}

/// Horizontal then vertical correlation with the same odd-length 1-D taps.
pub(crate) fn convolve_separable(frame: &GrayFrame, taps: &[f64]) -> GrayFrame {
    debug_assert!(taps.len() % 2 == 1);
    let r = (taps.len() / 2) as isize;
    let (w, h) = (frame.width(), frame.height());

    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &frame.data()[y * w..(y + 1) * w];
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let sx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += t * src[sx];
            }
            *o = acc;
        }
    });

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += t * tmp[sy * w + x];
            }
            *o = acc;
        }
    });
    GrayFrame::from_parts_unchecked(w, h, out)
}
