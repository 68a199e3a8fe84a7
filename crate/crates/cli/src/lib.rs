//! Command-line driver: config ingestion, built-in example registry, batch
//! execution of the analysis commands, and artifact emission.

pub mod commands;
pub mod config;
pub mod expr;
pub mod output;
pub mod plot;
pub mod systems;
