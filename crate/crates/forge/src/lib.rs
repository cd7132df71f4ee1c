//! File formats, experiment configs and the pipeline driver around
//! [`scfg_core`].

pub mod config;
pub mod formats;
pub mod io;
pub mod pipeline;

pub use config::Config;
pub use pipeline::{run_pipeline, Manifest};
