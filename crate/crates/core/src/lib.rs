//! Byzantine-robust aggregation for decentralized federated learning.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It provides:
//!
//! * [`paramvec`]: flat parameter vectors and the robust-statistics kernels
//!   (coordinate-wise median, norm clipping, cosine distance).
//! * [`robust_agg`]: baseline aggregation rules (Mean, FedAvg, Median,
//!   Trimmed-Mean, Krum, Multi-Krum, Clustering).
//! * [`wfagg`]: the weighted-filtering family: distance, similarity and
//!   temporal filters, the smoothed weighted aggregator and the composites.
//! * [`attacks`]: Noise, Sign-Flipping, Label-Flipping, ALIE and IPM.
//! * [`topology`]: k-regular ring lattices and the centralized star.
//! * [`learning`]: synthetic classification data, softmax regression / MLP
//!   models and the local SGD-with-momentum trainer.
//! * [`sim`]: the round-synchronous experiment engine and its metrics.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod attacks;
pub mod defense;
mod error;
mod math;
pub mod learning;
pub mod paramvec;
pub mod rng;
pub mod robust_agg;
pub mod sim;
pub mod topology;
pub mod wfagg;

pub use error::{Error, Result};
pub use paramvec::ParamVec;
