//! Std companion of `fullerkit-core`: scenario files, run reports, CSV
//! views, parallel drivers and the `fullerkit` command line.

pub mod cli;
pub mod parallel;
pub mod report;
pub mod scenario_io;

pub use fullerkit_core;
pub use scenario_io::{load_scenario, LoadError};
