//! Command line front end for `aprsim-core`: config files, parallel runners,
//! CSV/JSON reports and the calibration procedure.

pub mod calibrate;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod par;
pub mod report;

pub use config::Config;
pub use error::CliError;
