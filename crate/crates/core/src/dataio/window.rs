use nalgebra::{DMatrixView, Dyn};

use super::EegTrial;
use crate::error::{Error, Result};

/// Window length `w` and extraction step `s`, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub length_s: f64,
    pub step_s: f64,
}

impl WindowSpec {
    pub fn new(length_s: f64, step_s: f64) -> Result<Self> {
        if !(step_s > 0.0 && step_s <= length_s && length_s.is_finite()) {
            return Err(Error::Config(format!(
                "window step must satisfy 0 < step <= length (length {length_s}, step {step_s})"
            )));
        }
        Ok(Self { length_s, step_s })
    }

    /// Window length and step in samples. Both must be whole numbers at
    /// `rate_hz`.
    pub fn sample_counts(&self, rate_hz: f64) -> Result<(usize, usize)> {
        Ok((
            whole_samples(self.length_s, rate_hz, "window length")?,
            whole_samples(self.step_s, rate_hz, "window step")?,
        ))
    }
}

fn whole_samples(seconds: f64, rate_hz: f64, what: &str) -> Result<usize> {
    let exact = seconds * rate_hz;
    let rounded = exact.round();
    if rounded < 1.0 || (exact - rounded).abs() > 1e-9 * exact.max(1.0) {
        return Err(Error::Config(format!(
            "{what} of {seconds} s is not a whole number of samples at {rate_hz} Hz"
        )));
    }
    Ok(rounded as usize)
}

/// Number of windows for a signal of `n_samples` samples.
pub fn window_count(n_samples: usize, len: usize, step: usize) -> usize {
    if n_samples < len {
        0
    } else {
        (n_samples - len) / step + 1
    }
}

pub type Segment<'a> = DMatrixView<'a, f64, nalgebra::U1, Dyn>;

/// Iterator over `(start_s, segment)` pairs of one trial.
pub struct Windows<'a> {
    trial: &'a EegTrial,
    len: usize,
    step: usize,
    next: usize,
    count: usize,
}

impl<'a> Iterator for Windows<'a> {
    type Item = (f64, Segment<'a>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let start = self.next * self.step;
        self.next += 1;
        Some((
            start as f64 / self.trial.rate_hz,
            self.trial.samples.rows(start, self.len),
        ))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.count - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Windows<'_> {}

/// Slices a trial into overlapping analysis windows.
pub fn windows<'a>(trial: &'a EegTrial, spec: &WindowSpec) -> Result<Windows<'a>> {
    let (len, step) = spec.sample_counts(trial.rate_hz)?;
    let count = window_count(trial.n_samples(), len, step);
    if count == 0 {
        return Err(Error::Data(format!(
            "trial {} lasts {} s, shorter than one {} s window",
            trial.trial_id,
            trial.duration_s(),
            spec.length_s
        )));
    }
    Ok(Windows {
        trial,
        len,
        step,
        next: 0,
        count,
    })
}
