//! Library surface of the pipeline driver; the `olr` binary is a thin
//! wrapper over these stages.

pub mod config;
pub mod pipeline;

pub use config::RunConfig;
