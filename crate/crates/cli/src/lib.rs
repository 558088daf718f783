//! Command-line front end: flag and config-file parsing, dispatch to the
//! bound computations, and output files.

pub mod config;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use run::{run, Failure, Report};
