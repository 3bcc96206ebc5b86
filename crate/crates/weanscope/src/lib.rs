//! File formats, the rayon executor and the staged pipeline around
//! `weanscope-core`.

pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{PipelineError, Result};
pub use exec::Rayon;
pub use pipeline::{run_stage, Stage};
