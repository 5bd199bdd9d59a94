use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::{FeatureExtractor, StimulusSet};
use crate::dataio::Segment;
use crate::error::{Error, Result};

/// Relative ridge added to the diagonal of the EEG autocovariance.
const RIDGE: f64 = 1e-9;

/// Largest canonical correlation against each target's sine/cosine bank.
pub struct Cca;

/// For every target, the largest canonical correlation between the window's
/// channels and `{sin, cos}(2π·h·f·t)` for `h = 1..=n_harmonics`.
pub fn cca(segment: &Segment<'_>, rate_hz: f64, stimuli: &StimulusSet) -> Result<Vec<f64>> {
    let n = segment.nrows();
    let n_ref = 2 * stimuli.n_harmonics;
    if n <= n_ref {
        return Err(Error::Data(format!(
            "CCA needs more than {n_ref} samples for {n_ref} reference signals, got {n}"
        )));
    }
    stimuli.check_nyquist(rate_hz)?;

    let Some(x) = centred_usable_columns(segment) else {
        return Ok(vec![0.0; stimuli.n_targets()]);
    };
    let cxx = regularised_gram(&x);
    let lx = cxx
        .cholesky()
        .ok_or_else(|| Error::Numeric("EEG autocovariance is not positive definite".into()))?;

    stimuli
        .target_freqs_hz
        .iter()
        .map(|&f| {
            let y = centred(reference_bank(n, rate_hz, f, stimuli.n_harmonics));
            let ly = y
                .tr_mul(&y)
                .cholesky()
                .ok_or_else(|| Error::Numeric(format!("reference bank for {f} Hz is singular")))?;
            // Whitened cross-covariance Lx^-1 Cxy Ly^-T; its singular values are
            // the canonical correlations.
            let cxy = x.tr_mul(&y);
            let left = lx.l().solve_lower_triangular(&cxy).ok_or_else(|| {
                Error::Numeric("triangular solve failed in CCA".into())
            })?;
            let whitened = ly
                .l()
                .solve_lower_triangular(&left.transpose())
                .ok_or_else(|| Error::Numeric("triangular solve failed in CCA".into()))?;
            let rho = whitened.singular_values().max();
            Ok(rho.clamp(0.0, 1.0))
        })
        .collect()
}

fn reference_bank(n: usize, rate_hz: f64, f: f64, n_harmonics: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2 * n_harmonics, |r, c| {
        let h = (c / 2 + 1) as f64;
        let arg = TAU * h * f * r as f64 / rate_hz;
        if c % 2 == 0 {
            arg.sin()
        } else {
            arg.cos()
        }
    })
}

fn centred(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    m
}

/// Centred channels, dropping constant ones. `None` if nothing is left.
fn centred_usable_columns(segment: &Segment<'_>) -> Option<DMatrix<f64>> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for col in segment.column_iter() {
        let mean = col.mean();
        let centred = col.add_scalar(-mean);
        let scale = col.amax();
        if centred.norm() > 1e-12 * scale * (col.len() as f64).sqrt() && scale > 0.0 {
            cols.push(centred);
        }
    }
    (!cols.is_empty()).then(|| DMatrix::from_columns(&cols))
}

/// `X^T X` with each diagonal entry inflated by the relative ridge, which keeps
/// the result invariant under per-channel rescaling.
fn regularised_gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = x.tr_mul(x);
    for i in 0..g.nrows() {
        g[(i, i)] *= 1.0 + RIDGE;
    }
    g
}

impl FeatureExtractor for Cca {
    fn name(&self) -> &str {
        "cca"
    }

    fn feature_names(&self, stimuli: &StimulusSet, _channels: &[String]) -> Vec<String> {
        stimuli
            .target_freqs_hz
            .iter()
            .map(|f| format!("cca_{f}hz"))
            .collect()
    }

    fn extract(
        &self,
        segment: &Segment<'_>,
        rate_hz: f64,
        stimuli: &StimulusSet,
    ) -> Result<Vec<f64>> {
        cca(segment, rate_hz, stimuli)
    }

    fn one_per_target(&self) -> bool {
        true
    }
}
