//! File formats, metrics and the command line around `ctxparse-core`.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod model_file;
