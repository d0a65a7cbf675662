//! Concentric ring neighbourhoods and their averaging kernels.
//!
//! Ring `E(R)` holds every integer offset whose Euclidean distance from the
//! centre rounds (half-up) to `R`. Rings for `R = 0..=N` partition the disc
//! `N(N)`; ring 0 is the centre pixel alone.

use crate::error::{Error, Result};
use crate::image::{convolve, correlate_at, GrayFrame, Kernel, SaliencyMap};

/// `(di, dj)`: row offset, column offset.
pub type Offset = (i32, i32);

/// True when `round(sqrt(d2)) == radius` with half-up rounding.
///
/// Equivalent to `(2R - 1)^2 <= 4 d2 < (2R + 1)^2`, evaluated in integers.
#[inline]
fn rounds_to(d2: i64, radius: i64) -> bool {
    let lo = (2 * radius - 1).max(0);
    let hi = 2 * radius + 1;
    lo * lo <= 4 * d2 && 4 * d2 < hi * hi
}

/// Members of ring `E(radius)` in row-major order.
pub fn ring_members(radius: i32) -> Result<Vec<Offset>> {
    if radius < 0 {
        return Err(Error::param(format!("ring radius must be >= 0, got {radius}")));
    }
    let r = radius;
    let mut out = Vec::new();
    for di in -r..=r {
        for dj in -r..=r {
            if rounds_to((di * di + dj * dj) as i64, r as i64) {
                out.push((di, dj));
            }
        }
    }
    Ok(out)
}

/// Uniform averaging mask over one ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RingKernel {
    radius: u32,
    members: Vec<Offset>,
    kernel: Kernel,
}

impl RingKernel {
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn members(&self) -> &[Offset] {
        &self.members
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Root-mean-square distance of the members from the centre.
    pub fn rms_radius(&self) -> f64 {
        let total: i64 = self
            .members
            .iter()
            .map(|&(di, dj)| (di * di + dj * dj) as i64)
            .sum();
        (total as f64 / self.members.len() as f64).sqrt()
    }

    /// Text grid of the mask, `1/n` on members and `0` elsewhere.
    pub fn to_text_grid(&self) -> String {
        let weight = format!("1/{}", self.members.len());
        let cell_width = weight.len();
        let side = self.kernel.side();
        let mut out = String::new();
        for row in self.kernel.weights().chunks(side) {
            let cells: Vec<String> = row
                .iter()
                .map(|&w| {
                    let s = if w == 0.0 { "0" } else { weight.as_str() };
                    format!("{s:>cell_width$}")
                })
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn ring_kernel(radius: i32) -> Result<RingKernel> {
    let members = ring_members(radius)?;
    let weight = 1.0 / members.len() as f64;
    let r = radius as usize;
    let side = 2 * r + 1;
    let mut weights = vec![0.0; side * side];
    for &(di, dj) in &members {
        weights[(di + radius) as usize * side + (dj + radius) as usize] = weight;
    }
    Ok(RingKernel {
        radius: radius as u32,
        members,
        kernel: Kernel::new(side, weights)?,
    })
}

/// Ring kernels for radii `0..=max_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingFamily {
    rings: Vec<RingKernel>,
}

impl RingFamily {
    pub fn new(max_radius: u32) -> Self {
        let rings = (0..=max_radius as i32)
            .map(|r| ring_kernel(r).expect("non-negative radius"))
            .collect();
        Self { rings }
    }

    pub fn max_radius(&self) -> u32 {
        (self.rings.len() - 1) as u32
    }

    pub fn rings(&self) -> &[RingKernel] {
        &self.rings
    }

    pub fn ring(&self, radius: u32) -> &RingKernel {
        &self.rings[radius as usize]
    }
}

impl Default for RingFamily {
    /// Radius 4, i.e. a 9x9 window.
    fn default() -> Self {
        Self::new(4)
    }
}

/// Mean-over-ring maps `mu_E(0) ..= mu_E(N)`; the first is the frame itself.
pub fn ring_means(frame: &GrayFrame, family: &RingFamily) -> Vec<SaliencyMap> {
    family
        .rings()
        .iter()
        .map(|ring| {
            if ring.radius == 0 {
                frame.clone()
            } else {
                convolve(frame, &ring.kernel)
            }
        })
        .collect()
}

/// Ring mean at one pixel; bitwise equal to the corresponding [`ring_means`] entry.
pub fn ring_mean_at(frame: &GrayFrame, ring: &RingKernel, x: usize, y: usize) -> f64 {
    if ring.radius == 0 {
        frame.get(x, y)
    } else {
        correlate_at(frame, &ring.kernel, x, y)
    }
}
