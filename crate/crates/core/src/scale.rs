//! Per-point Gaussian scale estimation from radial ring means.
//!
//! For a target `A exp(-r^2 / 2 sigma^2) + B`, the normalised profile
//! `P(r) = (rho(r) - B) / (rho(0) - B)` equals `exp(-r^2 / 2 sigma^2)`, so
//! `sigma = r / sqrt(-2 ln P(r))`. `rho(r)` is the mean of ring `E(r)` and
//! `B` the mean of ring `E(n + 1)`. The estimate is the minimum over radii.
//!
//! A ring of pixels is not a circle: `E(1)` mixes distance 1 and sqrt(2).
//! By default the radius plugged into the inversion is the ring's RMS member
//! distance, which removes most of the discretisation bias of the nominal
//! integer radius (about -18% at `r = 1`).

use crate::error::{Error, Result};
use crate::image::GrayFrame;
use crate::rings::{ring_mean_at, RingFamily};

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub center: (usize, usize),
    /// `rho(0) ..= rho(n)`; `rho(0)` is the centre pixel.
    pub rho: Vec<f64>,
    /// Mean of ring `n + 1`.
    pub background: f64,
}

impl RadialProfile {
    /// Number of scale rings `n`.
    pub fn rings(&self) -> usize {
        self.rho.len() - 1
    }
}

/// Radius used when inverting `P(r)` for ring `r`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RingRadius {
    /// The integer ring index.
    Nominal,
    /// Root-mean-square distance of the ring's pixels.
    #[default]
    Effective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimate {
    /// Minimum over the defined per-radius values; `None` if none is defined.
    pub sigma: Option<f64>,
    /// `sigma(r)` for `r = 1..=n`.
    pub per_radius: Vec<Option<f64>>,
}

impl ScaleEstimate {
    pub fn is_valid(&self) -> bool {
        self.sigma.is_some()
    }

    pub fn clamped(&self, low: f64, high: f64) -> Option<f64> {
        self.sigma.map(|s| s.clamp(low, high))
    }
}

/// Ring means at `(x, y)` using the rings of `family`, which must reach `n + 1`.
pub fn radial_profile_with(
    family: &RingFamily,
    frame: &GrayFrame,
    x: usize,
    y: usize,
    n: usize,
) -> Result<RadialProfile> {
    if n < 1 {
        return Err(Error::param("scale estimation needs n >= 1"));
    }
    if (family.max_radius() as usize) < n + 1 {
        return Err(Error::param(format!(
            "ring family of radius {} cannot serve n = {n}",
            family.max_radius()
        )));
    }
    frame.check_point(x as i64, y as i64)?;
    let rho = (0..=n)
        .map(|r| ring_mean_at(frame, family.ring(r as u32), x, y))
        .collect();
    let background = ring_mean_at(frame, family.ring(n as u32 + 1), x, y);
    Ok(RadialProfile {
        center: (x, y),
        rho,
        background,
    })
}

/// Radial profile at `(x, y)` with `n` scale rings and background ring `n + 1`.
pub fn radial_profile(frame: &GrayFrame, x: i64, y: i64, n: usize) -> Result<RadialProfile> {
    frame.check_point(x, y)?;
    radial_profile_with(&RingFamily::new(n as u32 + 1), frame, x as usize, y as usize, n)
}

/// `r / sqrt(-2 ln p)`, defined for `0 < p < 1`.
#[inline]
pub fn sigma_from_ratio(radius: f64, p: f64) -> Option<f64> {
    if p > 0.0 && p < 1.0 {
        Some(radius / (-2.0 * p.ln()).sqrt())
    } else {
        None
    }
}

pub fn estimate_sigma(profile: &RadialProfile) -> ScaleEstimate {
    estimate_sigma_with(profile, RingRadius::default())
}

pub fn estimate_sigma_with(profile: &RadialProfile, convention: RingRadius) -> ScaleEstimate {
    let n = profile.rings();
    let peak = profile.rho[0] - profile.background;
    if !(peak > 0.0) {
        return ScaleEstimate {
            sigma: None,
            per_radius: vec![None; n],
        };
    }
    let per_radius: Vec<Option<f64>> = (1..=n)
        .map(|r| {
            let p = (profile.rho[r] - profile.background) / peak;
            let radius = match convention {
                RingRadius::Nominal => r as f64,
                RingRadius::Effective => effective_radius(r),
            };
            sigma_from_ratio(radius, p)
        })
        .collect();
    let sigma = per_radius.iter().flatten().copied().reduce(f64::min);
    ScaleEstimate { sigma, per_radius }
}

/// RMS member distance of ring `r`, cached for the small radii used here.
pub fn effective_radius(r: usize) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| RingFamily::new(16).rings().iter().map(|k| k.rms_radius()).collect());
    match table.get(r) {
        Some(&v) => v,
        None => RingFamily::new(r as u32).ring(r as u32).rms_radius(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rings::ring_members;
    use proptest::prelude::*;

    fn gaussian(w: usize, h: usize, cx: f64, cy: f64, a: f64, b: f64, s: f64) -> GrayFrame {
        GrayFrame::from_fn(w, h, |x, y| {
            let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            a * (-r2 / (2.0 * s * s)).exp() + b
        })
    }

    /// Ring mean of the analytic target evaluated directly on member offsets.
    fn oracle_rho(r: i32, a: f64, b: f64, s: f64) -> f64 {
        let m = ring_members(r).unwrap();
        b + a * m
            .iter()
            .map(|&(di, dj)| (-((di * di + dj * dj) as f64) / (2.0 * s * s)).exp())
            .sum::<f64>()
            / m.len() as f64
    }

    #[test]
    fn constant_frame_profile() {
        let f = GrayFrame::constant(15, 15, 9.0);
        let p = radial_profile(&f, 7, 7, 3).unwrap();
        assert!(p.rho.iter().all(|&v| (v - 9.0).abs() < 1e-12));
        assert!((p.background - 9.0).abs() < 1e-12);
        assert!(!estimate_sigma(&p).is_valid());
    }

    #[test]
    fn profile_of_gaussian_matches_member_oracle() {
        let (a, b, s) = (100.0, 20.0, 1.2);
        let f = gaussian(21, 21, 10.0, 10.0, a, b, s);
        let p = radial_profile(&f, 10, 10, 3).unwrap();
        for r in 0..=3 {
            assert!((p.rho[r] - oracle_rho(r as i32, a, b, s)).abs() < 1e-10);
        }
        assert!((p.background - oracle_rho(4, a, b, s)).abs() < 1e-10);
        let est = estimate_sigma(&p).sigma.unwrap();
        assert!((est - 1.2).abs() / 1.2 < 0.15, "sigma {est}");
    }

    #[test]
    fn impulse_profile() {
        let f = GrayFrame::from_fn(11, 11, |x, y| if (x, y) == (5, 5) { 40.0 } else { 0.0 });
        let p = radial_profile(&f, 5, 5, 3).unwrap();
        assert_eq!(p.rho, vec![40.0, 0.0, 0.0, 0.0]);
        // P(r) = 0 everywhere: no radius yields a scale
        assert!(!estimate_sigma(&p).is_valid());
    }

    #[test]
    fn rejects_bad_requests() {
        let f = GrayFrame::constant(8, 8, 1.0);
        assert!(matches!(radial_profile(&f, 8, 0, 3), Err(Error::OutOfBounds { .. })));
        assert!(matches!(radial_profile(&f, -1, 0, 3), Err(Error::OutOfBounds { .. })));
        assert!(radial_profile(&f, 1, 1, 0).is_err());
        assert!(radial_profile_with(&RingFamily::new(3), &f, 1, 1, 3).is_err());
    }

    #[test]
    fn zero_contrast_is_invalid() {
        let p = RadialProfile { center: (0, 0), rho: vec![5.0, 4.0, 3.0], background: 5.0 };
        assert!(!estimate_sigma(&p).is_valid());
    }

    #[test]
    fn centre_not_peak_is_invalid() {
        let p = RadialProfile { center: (0, 0), rho: vec![5.0, 6.0, 7.0, 5.5], background: 1.0 };
        let e = estimate_sigma(&p);
        assert_eq!(e.sigma, None);
        assert!(e.per_radius.iter().all(Option::is_none));
    }

    #[test]
    fn one_bad_ring_does_not_invalidate() {
        let p = RadialProfile { center: (0, 0), rho: vec![10.0, 11.0, 4.0, 2.0], background: 1.0 };
        let e = estimate_sigma(&p);
        assert_eq!(e.per_radius[0], None);
        assert!(e.is_valid());
        assert_eq!(e.sigma, e.per_radius[1..].iter().flatten().copied().reduce(f64::min));
    }

    #[test]
    fn nominal_radius_underestimates_first_ring() {
        let f = gaussian(21, 21, 10.0, 10.0, 100.0, 0.0, 1.2);
        let p = radial_profile(&f, 10, 10, 3).unwrap();
        let nominal = estimate_sigma_with(&p, RingRadius::Nominal).sigma.unwrap();
        let effective = estimate_sigma_with(&p, RingRadius::Effective).sigma.unwrap();
        assert!((nominal - 1.2).abs() / 1.2 > 0.15);
        assert!((effective - 1.2).abs() / 1.2 < 0.05);
    }

    #[test]
    fn effective_radii() {
        assert_eq!(effective_radius(0), 0.0);
        assert!((effective_radius(1) - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((effective_radius(2) - (56.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!((effective_radius(20) - RingFamily::new(20).ring(20).rms_radius()).abs() < 1e-15);
    }

    #[test]
    fn clamp_applies_only_to_valid() {
        let e = ScaleEstimate { sigma: Some(7.0), per_radius: vec![Some(7.0)] };
        assert_eq!(e.clamped(0.5, 4.0), Some(4.0));
        let bad = ScaleEstimate { sigma: None, per_radius: vec![None] };
        assert_eq!(bad.clamped(0.5, 4.0), None);
    }

    proptest! {
        #[test]
        fn point_samples_recover_sigma_exactly(s in 0.3..5.0f64, r in 0.5..6.0f64) {
            let p = (-(r * r) / (2.0 * s * s)).exp();
            prop_assume!(p > 1e-300 && p < 1.0);
            let got = sigma_from_ratio(r, p).unwrap();
            prop_assert!((got - s).abs() <= 1e-9 * s);
        }

        #[test]
        fn contrast_invariant(a in 0.1..20.0f64, b in -100.0..100.0f64, s in 0.8..2.0f64) {
            let f = gaussian(15, 15, 7.0, 7.0, 50.0, 10.0, s);
            let g = f.map(|v| a * v + b);
            let e1 = estimate_sigma(&radial_profile(&f, 7, 7, 3).unwrap());
            let e2 = estimate_sigma(&radial_profile(&g, 7, 7, 3).unwrap());
            let (s1, s2) = (e1.sigma.unwrap(), e2.sigma.unwrap());
            prop_assert!((s1 - s2).abs() <= 1e-9 * s1);
            for (p, q) in e1.per_radius.iter().zip(&e2.per_radius) {
                prop_assert_eq!(p.is_some(), q.is_some());
            }
        }

        #[test]
        fn gaussian_profiles_give_positive_scales(s in 0.6..2.5f64) {
            let f = gaussian(15, 15, 7.0, 7.0, 80.0, 5.0, s);
            let e = estimate_sigma(&radial_profile(&f, 7, 7, 3).unwrap());
            prop_assert!(e.per_radius.iter().flatten().all(|&v| v > 0.0));
            let min = e.sigma.unwrap();
            prop_assert!(e.per_radius.iter().flatten().any(|&v| v == min));
        }
    }
}
