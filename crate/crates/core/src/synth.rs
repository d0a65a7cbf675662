//! Ground-truthed synthetic scenes.
//!
//! A scene is composed additively: background, clutter primitives, Gaussian
//! targets `A exp(-((x - x_T)^2 + (y - y_T)^2) / 2 sigma^2) + B`, then white
//! sensor noise. Clipping to the output range is applied last.
//!
//! Scene files use the flat `key = value` format with repeatable `[target]`
//! and `[clutter]` blocks:
//!
//! ```text
//! width = 128
//! height = 128
//! seed = 7
//! background = filtered_noise    # or `flat`
//! background_level = 60
//! background_std = 4
//! correlation_length = 3
//! sensor_noise_std = 1
//! frames = 10                    # sequences only
//! velocity_x = 1
//!
//! [target]
//! x = 40
//! y = 50
//! amplitude = 30
//! sigma = 1.3
//!
//! [clutter]
//! kind = ridge                   # ridge | edge | corner | block | decoy
//! x = 90
//! y = 30
//! angle = 30
//! length = 40
//! width = 1.2
//! amplitude = 40
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::image::{gaussian_blur, gaussian_kernel_1d, GrayFrame};
use crate::kv;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTargetSpec {
    /// Column of the centre.
    pub x: f64,
    /// Row of the centre.
    pub y: f64,
    pub amplitude: f64,
    pub background: f64,
    pub sigma: f64,
}

impl GaussianTargetSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param(format!("target amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("target sigma must be positive, got {}", self.sigma)));
        }
        if !(self.x.is_finite() && self.y.is_finite() && self.background.is_finite()) {
            return Err(Error::param("target position and background must be finite"));
        }
        Ok(())
    }

    /// Target intensity at pixel `(x, y)`, background included.
    #[inline]
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let r2 = (x - self.x).powi(2) + (y - self.y).powi(2);
        self.amplitude * (-r2 / (2.0 * self.sigma * self.sigma)).exp() + self.background
    }

    /// Centre rounded to the nearest pixel.
    pub fn pixel(&self) -> (i64, i64) {
        (self.x.round() as i64, self.y.round() as i64)
    }
}

pub fn render_target(spec: &GaussianTargetSpec, width: usize, height: usize) -> Result<GrayFrame> {
    spec.validate()?;
    let data = (0..width * height)
        .map(|i| spec.value_at((i % width) as f64, (i / width) as f64))
        .collect();
    GrayFrame::new(width, height, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    Flat { level: f64 },
    /// White noise smoothed by a normalised Gaussian of `correlation_length`
    /// and rescaled to standard deviation `std`.
    FilteredNoise { level: f64, std: f64, correlation_length: f64 },
}

/// Additive clutter primitives. Angles are in degrees, counter-clockwise
/// from the +x axis with y pointing down the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clutter {
    /// Line segment with a Gaussian cross-profile of standard deviation `width`.
    Ridge { x: f64, y: f64, angle: f64, length: f64, width: f64, amplitude: f64 },
    /// Sigmoid step through `(x, y)`; the bright side faces the normal `angle`.
    StepEdge { x: f64, y: f64, angle: f64, amplitude: f64, softness: f64 },
    /// Bright quadrant bounded by two perpendicular soft edges meeting at `(x, y)`.
    Corner { x: f64, y: f64, angle: f64, amplitude: f64, softness: f64 },
    /// Rotated rectangle with soft borders.
    Block { x: f64, y: f64, width: f64, height: f64, angle: f64, amplitude: f64, softness: f64 },
    /// Isotropic Gaussian blob that looks exactly like a target.
    Decoy { x: f64, y: f64, amplitude: f64, sigma: f64 },
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Coordinates of `(px, py)` in a frame rotated by `angle` degrees about `(x, y)`.
fn local(px: f64, py: f64, x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.to_radians().sin_cos();
    let (dx, dy) = (px - x, py - y);
    (dx * c + dy * s, -dx * s + dy * c)
}

impl Clutter {
    pub fn name(&self) -> &'static str {
        match self {
            Clutter::Ridge { .. } => "ridge",
            Clutter::StepEdge { .. } => "edge",
            Clutter::Corner { .. } => "corner",
            Clutter::Block { .. } => "block",
            Clutter::Decoy { .. } => "decoy",
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Clutter::Ridge { amplitude, .. }
            | Clutter::StepEdge { amplitude, .. }
            | Clutter::Corner { amplitude, .. }
            | Clutter::Block { amplitude, .. }
            | Clutter::Decoy { amplitude, .. } => amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{} {name} must be positive, got {v}", self.name())))
            }
        };
        match *self {
            Clutter::Ridge { length, width, .. } => {
                if !(length >= 0.0) {
                    return Err(Error::param("ridge length must be >= 0"));
                }
                positive("width", width)
            }
            Clutter::StepEdge { softness, .. } | Clutter::Corner { softness, .. } => positive("softness", softness),
            Clutter::Block { width, height, softness, .. } => {
                positive("width", width)?;
                positive("height", height)?;
                positive("softness", softness)
            }
            Clutter::Decoy { sigma, .. } => positive("sigma", sigma),
        }
    }

    /// Contribution at pixel `(px, py)`.
    pub fn value_at(&self, px: f64, py: f64) -> f64 {
        match *self {
            Clutter::Ridge { x, y, angle, length, width, amplitude } => {
                let (u, v) = local(px, py, x, y, angle);
                let du = (u.abs() - length / 2.0).max(0.0);
                amplitude * (-(du * du + v * v) / (2.0 * width * width)).exp()
            }
            Clutter::StepEdge { x, y, angle, amplitude, softness } => {
                let (u, _) = local(px, py, x, y, angle);
                amplitude * sigmoid(u / softness)
            }
            Clutter::Corner { x, y, angle, amplitude, softness } => {
                let (u, v) = local(px, py, x, y, angle);
                amplitude * sigmoid(u / softness) * sigmoid(v / softness)
            }
            Clutter::Block { x, y, width, height, angle, amplitude, softness } => {
                let (u, v) = local(px, py, x, y, angle);
                amplitude
                    * sigmoid((width / 2.0 - u.abs()) / softness)
                    * sigmoid((height / 2.0 - v.abs()) / softness)
            }
            Clutter::Decoy { x, y, amplitude, sigma } => {
                let r2 = (px - x).powi(2) + (py - y).powi(2);
                amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: Background,
    pub clutter: Vec<Clutter>,
    /// Target backgrounds `B` add on top of the scene background.
    pub targets: Vec<GaussianTargetSpec>,
    pub sensor_noise_std: f64,
    pub seed: u64,
    /// Output range; `None` leaves values unclipped.
    pub clip: Option<(f64, f64)>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            background: Background::Flat { level: 0.0 },
            clutter: Vec::new(),
            targets: Vec::new(),
            sensor_noise_std: 0.0,
            seed: 0,
            clip: None,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("scene dimensions must be non-zero"));
        }
        if !(self.sensor_noise_std >= 0.0 && self.sensor_noise_std.is_finite()) {
            return Err(Error::param("sensor_noise_std must be >= 0"));
        }
        if let Background::FilteredNoise { std, correlation_length, .. } = self.background {
            if !(std >= 0.0 && correlation_length > 0.0) {
                return Err(Error::param("filtered noise needs std >= 0 and correlation_length > 0"));
            }
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo < hi) {
                return Err(Error::param(format!("bad clip range [{lo}, {hi}]")));
            }
        }
        for c in &self.clutter {
            c.validate()?;
        }
        for t in &self.targets {
            t.validate()?;
            let (x, y) = t.pixel();
            if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                return Err(Error::param(format!("target centre ({}, {}) lies outside the frame", t.x, t.y)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneMetadata {
    /// Pixels changed by clipping.
    pub saturated_pixels: usize,
    /// `(target, clutter)` index pairs where the clutter is significant
    /// (above 1% of its amplitude) at the target centre.
    pub overlaps: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub frame: GrayFrame,
    pub truth: GroundTruth,
    pub metadata: SceneMetadata,
}

fn white_noise(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| normal.sample(rng)).collect()
}

fn render_background(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<GrayFrame> {
    let (w, h) = (spec.width, spec.height);
    match spec.background {
        Background::Flat { level } => Ok(GrayFrame::constant(w, h, level)),
        Background::FilteredNoise { level, std, correlation_length } => {
            let white = GrayFrame::new(w, h, white_noise(rng, w * h, 1.0))?;
            let smooth = gaussian_blur(&white, correlation_length)?;
            // unit white noise through the separable kernel has variance (sum w^2)^2
            let g: f64 = gaussian_kernel_1d(correlation_length)?.iter().map(|v| v * v).sum();
            Ok(smooth.map(|v| level + std * v / g))
        }
    }
}

pub fn render_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut bg_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);

    let background = render_background(spec, &mut bg_rng)?;
    let sensor = if spec.sensor_noise_std > 0.0 {
        white_noise(&mut noise_rng, w * h, spec.sensor_noise_std)
    } else {
        vec![0.0; w * h]
    };

    let mut saturated = 0;
    let data: Vec<f64> = background
        .data()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let (px, py) = ((i % w) as f64, (i / w) as f64);
            let mut v = b;
            for c in &spec.clutter {
                v += c.value_at(px, py);
            }
            for t in &spec.targets {
                v += t.value_at(px, py);
            }
            v += sensor[i];
            if let Some((lo, hi)) = spec.clip {
                let c = v.clamp(lo, hi);
                if c != v {
                    saturated += 1;
                }
                v = c;
            }
            v
        })
        .collect();

    let mut overlaps = Vec::new();
    for (ti, t) in spec.targets.iter().enumerate() {
        for (ci, c) in spec.clutter.iter().enumerate() {
            if c.value_at(t.x, t.y).abs() > 0.01 * c.amplitude().abs() {
                overlaps.push((ti, ci));
            }
        }
    }

    Ok(Scene {
        frame: GrayFrame::new(w, h, data)?,
        truth: GroundTruth {
            frame_id: 0,
            targets: spec.targets.iter().map(|t| (t.x.round() as usize, t.y.round() as usize)).collect(),
        },
        metadata: SceneMetadata { saturated_pixels: saturated, overlaps },
    })
}

/// Frame `i` of a sequence: targets moved by `i * velocity`, seed `seed + i`.
pub fn sequence_frame_spec(spec: &SceneSpec, index: usize, velocity: (f64, f64)) -> SceneSpec {
    let k = index as f64;
    SceneSpec {
        seed: spec.seed.wrapping_add(index as u64),
        targets: spec
            .targets
            .iter()
            .map(|t| GaussianTargetSpec { x: t.x + k * velocity.0, y: t.y + k * velocity.1, ..*t })
            .collect(),
        ..spec.clone()
    }
}

pub fn render_sequence(spec: &SceneSpec, frames: usize, velocity: (f64, f64)) -> Result<Vec<Scene>> {
    let specs: Vec<SceneSpec> = (0..frames).map(|i| sequence_frame_spec(spec, i, velocity)).collect();
    for (i, s) in specs.iter().enumerate() {
        s.validate().map_err(|e| Error::param(format!("frame {i}: {e}")))?;
    }
    specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut scene = render_scene(s)?;
            scene.truth.frame_id = i as u32;
            Ok(scene)
        })
        .collect()
}

/// A scene plus sequence parameters, as read from a scene file.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub scene: SceneSpec,
    pub frames: usize,
    pub velocity: (f64, f64),
}

impl SequenceSpec {
    pub fn render(&self) -> Result<Vec<Scene>> {
        render_sequence(&self.scene, self.frames, self.velocity)
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let blocks = kv::parse(text)?;
        let mut r = kv::Reader::new(&blocks[0]);
        let width = r.require("width")?;
        let height = r.require("height")?;
        let seed = r.get_or("seed", 0u64)?;
        let sensor_noise_std = r.get_or("sensor_noise_std", 0.0)?;
        let level = r.get_or("background_level", 0.0)?;
        let background = match r.get_or("background", "flat".to_string())?.as_str() {
            "flat" => Background::Flat { level },
            "filtered_noise" => Background::FilteredNoise {
                level,
                std: r.require("background_std")?,
                correlation_length: r.require("correlation_length")?,
            },
            other => return Err(Error::param(format!("unknown background `{other}`"))),
        };
        let clip = match r.get::<String>("clip")?.as_deref() {
            None | Some("none") => None,
            Some(range) => {
                let (lo, hi) = range
                    .split_once(',')
                    .ok_or_else(|| Error::param(format!("clip must be `low, high` or `none`, got `{range}`")))?;
                let p = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::param(format!("bad clip bound `{s}`")))
                };
                Some((p(lo)?, p(hi)?))
            }
        };
        let frames = r.get_or("frames", 1usize)?;
        let velocity = (r.get_or("velocity_x", 0.0)?, r.get_or("velocity_y", 0.0)?);
        r.finish()?;

        let mut targets = Vec::new();
        let mut clutter = Vec::new();
        for b in &blocks[1..] {
            let mut r = kv::Reader::new(b);
            match b.name.as_str() {
                "target" => targets.push(GaussianTargetSpec {
                    x: r.require("x")?,
                    y: r.require("y")?,
                    amplitude: r.require("amplitude")?,
                    sigma: r.require("sigma")?,
                    background: r.get_or("background", 0.0)?,
                }),
                "clutter" => clutter.push(read_clutter(&mut r)?),
                other => {
                    return Err(Error::Config { line: b.line, msg: format!("unknown block [{other}]") })
                }
            }
            r.finish()?;
        }

        let spec = Self {
            scene: SceneSpec { width, height, background, clutter, targets, sensor_noise_std, seed, clip },
            frames,
            velocity,
        };
        spec.scene.validate()?;
        Ok(spec)
    }
}

fn read_clutter(r: &mut kv::Reader) -> Result<Clutter> {
    let kind: String = r.require("kind")?;
    let x = r.require("x")?;
    let y = r.require("y")?;
    let amplitude = r.require("amplitude")?;
    Ok(match kind.as_str() {
        "ridge" => Clutter::Ridge {
            x,
            y,
            amplitude,
            angle: r.get_or("angle", 0.0)?,
            length: r.require("length")?,
            width: r.get_or("width", 1.0)?,
        },
        "edge" => Clutter::StepEdge { x, y, amplitude, angle: r.get_or("angle", 0.0)?, softness: r.get_or("softness", 1.0)? },
        "corner" => Clutter::Corner { x, y, amplitude, angle: r.get_or("angle", 0.0)?, softness: r.get_or("softness", 1.0)? },
        "block" => Clutter::Block {
            x,
            y,
            amplitude,
            width: r.require("width")?,
            height: r.require("height")?,
            angle: r.get_or("angle", 0.0)?,
            softness: r.get_or("softness", 1.0)?,
        },
        "decoy" => Clutter::Decoy { x, y, amplitude, sigma: r.require("sigma")? },
        other => return Err(Error::param(format!("unknown clutter kind `{other}`"))),
    })
}
