//! File formats, validation suites and the `blackout` command line.

pub mod cli;
pub mod formats;
pub mod parallel;
pub mod validate;
