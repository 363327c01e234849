//! Host-side half of tabreason: file formats, model backends (HTTP, replay,
//! recording), the parallel batch runner, dataset building, and the
//! command-line front end. The pure pipeline lives in `tabreason-core`.
#![warn(rust_2018_idioms, unused_qualifications)]

pub mod batch;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod http;
pub mod io;
pub mod replay;
pub mod templates;

pub use batch::{fit_to_budget, run_batch, run_batch_with, BatchRun};
pub use config::{load_config, parse_config, Settings};
pub use http::{HttpBackend, HttpConfig};
pub use io::IoFailure;
pub use replay::{RecordingBackend, ReplayBackend, ReplayMode, ScriptEntry};
