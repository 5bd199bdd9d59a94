use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::EegTrial;
use crate::error::{Error, Result};

/// Parameters of a synthetic SSVEP recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub target_hz: f64,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub n_channels: usize,
    /// Amplitude of the fundamental, second harmonic, ...
    pub harmonic_amps: Vec<f64>,
    /// Independent Gaussian noise per channel.
    pub noise_sd: f64,
    /// Gaussian noise shared by all channels, as from a common source.
    pub common_noise_sd: f64,
    pub seed: u64,
}

/// Generates a sum of harmonics of `target_hz` with one random phase per
/// channel plus Gaussian white noise, part of it common to all channels. Identical specs give identical trials.
pub fn synth_ssvep(spec: &SynthSpec, trial_id: u64) -> Result<EegTrial> {
    let highest = spec.target_hz * spec.harmonic_amps.len() as f64;
    if highest >= spec.rate_hz / 2.0 {
        return Err(Error::Config(format!(
            "harmonic at {highest} Hz is at or above the Nyquist frequency of {} Hz",
            spec.rate_hz / 2.0
        )));
    }
    if spec.n_channels == 0 {
        return Err(Error::Config("synthetic trial needs at least one channel".into()));
    }
    if !(spec.noise_sd >= 0.0 && spec.common_noise_sd >= 0.0) {
        return Err(Error::Config(format!(
            "noise sd must be >= 0, got {} and {}",
            spec.noise_sd, spec.common_noise_sd
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phases: Vec<f64> = (0..spec.n_channels).map(|_| rng.random::<f64>() * TAU).collect();
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let common = Normal::new(0.0, spec.common_noise_sd).map_err(|e| Error::Config(e.to_string()))?;

    let n = (spec.duration_s * spec.rate_hz).round() as usize;
    let mut samples = DMatrix::zeros(n, spec.n_channels);
    for r in 0..n {
        let t = r as f64 / spec.rate_hz;
        let shared = if spec.common_noise_sd > 0.0 { common.sample(&mut rng) } else { 0.0 };
        for (c, phase) in phases.iter().enumerate() {
            let clean: f64 = spec
                .harmonic_amps
                .iter()
                .enumerate()
                .map(|(h, amp)| amp * (TAU * (h + 1) as f64 * spec.target_hz * t + phase).sin())
                .sum();
            let eps = if spec.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            samples[(r, c)] = clean + shared + eps;
        }
    }

    let names = (1..=spec.n_channels).map(|c| format!("ch{c}")).collect();
    EegTrial::new(samples, spec.rate_hz, names, spec.target_hz, trial_id)
}
