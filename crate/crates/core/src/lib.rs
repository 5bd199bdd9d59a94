pub mod dataio;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradopt;
pub mod lda;
pub mod probmodel;
pub mod skewnorm;

pub use error::{Error, Result};
