//! Command-line front end: certification runs, condition-number sweeps,
//! simulations and the reproduction experiments, with CSV and SVG output.

pub mod certfile;
pub mod cli;
pub mod experiments;
pub mod grid;
pub mod svg;
pub mod tables;

pub use cli::run;
