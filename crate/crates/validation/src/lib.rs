//! Fixed synthetic scenes used by the acceptance suite.

use irst_core::synth::{Background, Clutter, GaussianTargetSpec, SceneSpec};

/// Scale values swept by the scale-recovery check.
pub const SCALES: [f64; 4] = [0.8, 1.2, 1.6, 2.0];

/// Isolated target on a 64x64 frame, centred on a pixel.
pub fn scale_target(sigma: f64, amplitude: f64) -> GaussianTargetSpec {
    GaussianTargetSpec {
        x: 32.0,
        y: 32.0,
        amplitude,
        background: 0.0,
        sigma,
    }
}

/// Noisy scale-recovery trial: correlated background whose standard
/// deviation is a fifth of the target amplitude, so `SCR_in` is about 5.
pub fn noisy_scale_scene(sigma: f64, seed: u64) -> SceneSpec {
    let std = 10.0;
    SceneSpec {
        width: 64,
        height: 64,
        background: Background::FilteredNoise {
            level: 50.0,
            std,
            correlation_length: 1.5,
        },
        targets: vec![scale_target(sigma, 5.0 * std)],
        seed,
        ..Default::default()
    }
}

pub const SEPARATION_TARGET: (usize, usize) = (30, 64);

pub const SEPARATION_RIDGE: Clutter = Clutter::Ridge {
    x: 70.0,
    y: 30.0,
    angle: 20.0,
    length: 60.0,
    width: 1.0,
    amplitude: 40.0,
};

pub const SEPARATION_EDGE: Clutter = Clutter::StepEdge {
    x: 100.0,
    y: 100.0,
    angle: 20.0,
    amplitude: 40.0,
    softness: 1.0,
};

/// 128x128 frame with one target, a ridge and a step edge that do not touch.
pub fn separation_scene(background: Background, seed: u64) -> SceneSpec {
    SceneSpec {
        width: 128,
        height: 128,
        background,
        clutter: vec![SEPARATION_RIDGE, SEPARATION_EDGE],
        targets: vec![GaussianTargetSpec {
            x: SEPARATION_TARGET.0 as f64,
            y: SEPARATION_TARGET.1 as f64,
            amplitude: 40.0,
            background: 0.0,
            sigma: 1.5,
        }],
        seed,
        ..Default::default()
    }
}

pub const SEQUENCE_FRAMES: usize = 100;
pub const SEQUENCE_VELOCITY: (f64, f64) = (1.8, 0.15);

/// First frame of the 256x256 suppression sequence: a dim target crossing
/// correlated background with two long ridges, a step edge and a block.
pub fn suppression_scene() -> SceneSpec {
    let amplitude = 20.0;
    SceneSpec {
        width: 256,
        height: 256,
        background: Background::FilteredNoise {
            level: 60.0,
            std: 8.0,
            correlation_length: 10.0,
        },
        clutter: vec![
            Clutter::Ridge { x: 128.0, y: 50.0, angle: 12.0, length: 600.0, width: 1.0, amplitude },
            Clutter::Ridge { x: 128.0, y: 195.0, angle: 6.0, length: 600.0, width: 1.5, amplitude },
            Clutter::StepEdge { x: 128.0, y: 238.0, angle: 93.0, amplitude, softness: 1.0 },
            Clutter::Block { x: 210.0, y: 95.0, width: 24.0, height: 12.0, angle: 35.0, amplitude, softness: 0.8 },
        ],
        targets: vec![GaussianTargetSpec {
            x: 30.0,
            y: 120.0,
            amplitude: 18.0,
            background: 0.0,
            sigma: 1.5,
        }],
        sensor_noise_std: 1.0,
        seed: 1000,
        ..Default::default()
    }
}
