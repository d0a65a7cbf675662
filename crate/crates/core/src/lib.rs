//! Single-frame infrared small-target detection.
//!
//! The detector enhances bright, compact structures with a multilayer gray
//! difference (MGD) saliency map, gates the salient region with Otsu's
//! threshold, estimates a Gaussian scale at every candidate pixel and keeps
//! only those whose local Hessian is negative definite and isotropic. The
//! crate also ships classical baselines (Top-Hat, Max-Median, DoG), a seeded
//! synthetic scene generator with ground truth, and SCR/SCRG/ROC evaluation.
//!
//! ```
//! use irst_core::{detector, synth, DetectorConfig};
//!
//! let target = synth::GaussianTargetSpec { x: 20.0, y: 24.0, amplitude: 80.0, background: 10.0, sigma: 1.3 };
//! let frame = synth::render_target(&target, 48, 48).unwrap();
//! let out = detector::detect(&frame, &DetectorConfig::default()).unwrap();
//! assert_eq!(out.detections.detections.len(), 1);
//! ```

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod detector;
pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod isotropy;
pub mod kv;
pub mod mgd;
pub mod pgm;
pub mod rings;
pub mod scale;
pub mod synth;

pub use detector::{Detection, DetectionSet, DetectorConfig};
pub use error::{Error, Result};
pub use image::{GrayFrame, Kernel, SaliencyMap};
pub use rings::{RingFamily, RingKernel};
