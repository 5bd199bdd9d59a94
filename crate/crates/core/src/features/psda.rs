use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FeatureExtractor, StimulusSet};
use crate::dataio::Segment;
use crate::error::{Error, Result};

/// Power at every (channel, target, harmonic) bin.
pub struct Psda;

/// DFT power `|X_k|^2 / N` at each harmonic of each target, with a
/// rectangular window. Output is channel-major, then target, then harmonic.
///
/// Every harmonic must fall exactly on a DFT bin of the segment.
pub fn psda(segment: &Segment<'_>, rate_hz: f64, stimuli: &StimulusSet) -> Result<Vec<f64>> {
    let n = segment.nrows();
    if n < 2 {
        return Err(Error::Data(format!("PSDA needs at least 2 samples, got {n}")));
    }
    stimuli.check_nyquist(rate_hz)?;
    let bins = harmonic_bins(n, rate_hz, stimuli)?;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(segment.ncols() * bins.len());
    for c in 0..segment.ncols() {
        for (slot, v) in buf.iter_mut().zip(segment.column(c).iter()) {
            *slot = Complex::new(*v, 0.0);
        }
        fft.process(&mut buf);
        out.extend(bins.iter().map(|&k| buf[k].norm_sqr() / n as f64));
    }
    Ok(out)
}

/// Bin indices in target-major, harmonic-minor order.
fn harmonic_bins(n: usize, rate_hz: f64, stimuli: &StimulusSet) -> Result<Vec<usize>> {
    let mut bins = Vec::with_capacity(stimuli.n_targets() * stimuli.n_harmonics);
    for f in &stimuli.target_freqs_hz {
        for h in 1..=stimuli.n_harmonics {
            let exact = h as f64 * f * n as f64 / rate_hz;
            let k = exact.round();
            if (exact - k).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "{} Hz does not fall on a DFT bin of a {n}-sample window at {rate_hz} Hz",
                    h as f64 * f
                )));
            }
            bins.push(k as usize);
        }
    }
    Ok(bins)
}

impl FeatureExtractor for Psda {
    fn name(&self) -> &str {
        "psda"
    }

    fn feature_names(&self, stimuli: &StimulusSet, channels: &[String]) -> Vec<String> {
        let mut names = Vec::new();
        for ch in channels {
            for f in &stimuli.target_freqs_hz {
                for h in 1..=stimuli.n_harmonics {
                    names.push(format!("psda_{ch}_{f}hz_h{h}"));
                }
            }
        }
        names
    }

    fn extract(
        &self,
        segment: &Segment<'_>,
        rate_hz: f64,
        stimuli: &StimulusSet,
    ) -> Result<Vec<f64>> {
        psda(segment, rate_hz, stimuli)
    }

    fn one_per_target(&self) -> bool {
        false
    }
}
