//! Command-line pipeline and file formats around `fundus-core`.

pub mod cache;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod eval;
pub mod io;
pub mod overlay;
pub mod pfm;
pub mod provenance;
