//! File formats, the threaded stage runner, reports and the command-line
//! front end for the `rapid_core` superpixel engines.

pub mod bench;
pub mod cli;
mod error;
pub mod fixtures;
pub mod model;
pub mod overlay;
pub mod parallel;
pub mod pnm;
pub mod prediction;
pub mod report;
pub mod rlbl;
pub mod run;

pub use error::{Error, Result};
pub use parallel::{run_parallel_pipeline, run_parallel_rapid, run_parallel_stage, ParallelRunner};
