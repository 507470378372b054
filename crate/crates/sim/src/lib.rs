//! Command-line runner for `dirac-core`: strict TOML scenarios, built-in
//! presets, CSV series and text reports.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
