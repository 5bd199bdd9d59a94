//! Per-window feature extraction.
//!
//! Every extractor implements [`FeatureExtractor`] and is looked up by name
//! in an [`ExtractorRegistry`]. The built-in registry knows `psda`, `cca`
//! and `combined` (PSDA and CCA features concatenated).

mod cca;
mod psda;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use cca::{cca, Cca};
pub use psda::{psda, Psda};

use crate::dataio::Segment;
use crate::error::{Error, Result};

/// Stimulation frequencies (one per target) and how many harmonics of each
/// are analysed.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSet {
    pub target_freqs_hz: Vec<f64>,
    pub n_harmonics: usize,
}

impl StimulusSet {
    pub fn new(target_freqs_hz: Vec<f64>, n_harmonics: usize) -> Result<Self> {
        if target_freqs_hz.is_empty() {
            return Err(Error::Config("at least one target frequency is required".into()));
        }
        if n_harmonics == 0 {
            return Err(Error::Config("n_harmonics must be >= 1".into()));
        }
        for (i, f) in target_freqs_hz.iter().enumerate() {
            if !(f.is_finite() && *f > 0.0) {
                return Err(Error::Config(format!("target frequency {f} must be positive")));
            }
            if target_freqs_hz[..i].contains(f) {
                return Err(Error::Config(format!("target frequency {f} listed twice")));
            }
        }
        Ok(Self {
            target_freqs_hz,
            n_harmonics,
        })
    }

    pub fn n_targets(&self) -> usize {
        self.target_freqs_hz.len()
    }

    /// Index of the target stimulated at `hz`.
    pub fn class_of(&self, hz: f64) -> Option<usize> {
        self.target_freqs_hz
            .iter()
            .position(|f| (f - hz).abs() <= 1e-9 * f.max(1.0))
    }

    pub(crate) fn check_nyquist(&self, rate_hz: f64) -> Result<()> {
        let highest = self
            .target_freqs_hz
            .iter()
            .fold(0.0f64, |m, f| m.max(*f))
            * self.n_harmonics as f64;
        if highest >= rate_hz / 2.0 {
            return Err(Error::Config(format!(
                "harmonic at {highest} Hz is at or above the Nyquist frequency of {} Hz",
                rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// A feature extraction method.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &str;

    /// Column labels for the vectors returned by [`extract`](Self::extract).
    fn feature_names(&self, stimuli: &StimulusSet, channels: &[String]) -> Vec<String>;

    fn extract(&self, segment: &Segment<'_>, rate_hz: f64, stimuli: &StimulusSet)
        -> Result<Vec<f64>>;

    /// Whether the output already holds exactly one value per target, in
    /// target order, so it can be thresholded without LDA fusion.
    fn one_per_target(&self) -> bool;
}

/// Several extractors whose outputs are concatenated in registration order.
pub struct Combined {
    name: String,
    parts: Vec<Arc<dyn FeatureExtractor>>,
}

impl Combined {
    pub fn new(name: impl Into<String>, parts: Vec<Arc<dyn FeatureExtractor>>) -> Self {
        Self {
            name: name.into(),
            parts,
        }
    }
}

impl FeatureExtractor for Combined {
    fn name(&self) -> &str {
        &self.name
    }

    fn feature_names(&self, stimuli: &StimulusSet, channels: &[String]) -> Vec<String> {
        self.parts
            .iter()
            .flat_map(|p| p.feature_names(stimuli, channels))
            .collect()
    }

    fn extract(
        &self,
        segment: &Segment<'_>,
        rate_hz: f64,
        stimuli: &StimulusSet,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for p in &self.parts {
            out.extend(p.extract(segment, rate_hz, stimuli)?);
        }
        Ok(out)
    }

    fn one_per_target(&self) -> bool {
        false
    }
}

#[derive(Clone, Default)]
pub struct ExtractorRegistry {
    extractors: BTreeMap<String, Arc<dyn FeatureExtractor>>,
}

impl ExtractorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `psda`, `cca` and `combined`.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        let psda: Arc<dyn FeatureExtractor> = Arc::new(Psda);
        let cca: Arc<dyn FeatureExtractor> = Arc::new(Cca);
        reg.register(psda.clone());
        reg.register(cca.clone());
        reg.register(Arc::new(Combined::new("combined", vec![psda, cca])));
        reg
    }

    /// Adds an extractor, replacing any previous one with the same name.
    pub fn register(&mut self, extractor: Arc<dyn FeatureExtractor>) {
        self.extractors.insert(extractor.name().to_owned(), extractor);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn FeatureExtractor>> {
        self.extractors.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown extractor \"{name}\" (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.extractors.keys().map(String::as_str)
    }
}
