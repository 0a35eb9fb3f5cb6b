//! Experiment harness for the longest-chain simulator: config files,
//! named presets, deterministic Monte Carlo sweeps, and exports.

pub mod calibrate;
pub mod config;
pub mod experiment;
pub mod presets;
pub mod stats;
