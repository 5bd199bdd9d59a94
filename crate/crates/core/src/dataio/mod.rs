//! Trial files, manifests, analysis windows, feature files and the
//! synthetic SSVEP generator.
//!
//! Signal files are comma-delimited with a header row of channel names and
//! one row per sample. The sampling rate is not stored in the file; it comes
//! from the experiment configuration.

mod featfile;
mod manifest;
mod synth;
mod trial;
mod window;

pub use featfile::{load_features, save_features, FeatureMatrix, FeatureRow};
pub use manifest::{load_manifest, save_manifest, ManifestEntry};
pub use synth::{synth_ssvep, SynthSpec};
pub use trial::{load_trial, save_trial, EegTrial};
pub use window::{window_count, windows, Segment, WindowSpec, Windows};
