//! File formats, configuration and pipeline commands around `charstyle-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{Error, Result};
