//! Universal coders, cutting-and-stacking measures and compression-ratio experiments.

pub mod bitcodes;
pub mod coder;
pub mod cutstack;
pub mod deficiency;
pub mod error;
pub mod harness;
pub mod lz;

pub use bitcodes::BitString;
pub use coder::Coder;
pub use error::{Error, Result};
pub mod kt;
pub mod measure;
pub mod sources;
pub mod theorem1;
