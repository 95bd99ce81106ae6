pub mod cli;
pub mod compressor;
pub mod curation;
pub mod error;
pub mod io;
pub mod metrics;
pub mod providers;
pub mod segmentation;
pub mod trainer;

pub use error::{Error, Result};
