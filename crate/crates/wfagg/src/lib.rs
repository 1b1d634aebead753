//! Command-line front end, file formats and verification harness for the
//! `wfagg-core` simulator.
//!
//! * [`config`]: versioned TOML experiment files and flag overrides.
//! * [`dataset`]: CSV import of real feature matrices.
//! * [`exec`]: a rayon-backed [`Executor`](wfagg_core::sim::Executor).
//! * [`output`]: per-run CSV/JSON results.
//! * [`sweep`]: resumable defense × attack × mode grids.
//! * [`presets`]: named experiment configurations.
//! * [`oracle`] and [`verify`]: brute-force reimplementations and the
//!   randomized checks run by `wfagg verify`.

pub mod config;
pub mod dataset;
mod error;
pub mod exec;
pub mod oracle;
pub mod output;
pub mod presets;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
