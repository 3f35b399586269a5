//! Cluster-then-specialize intrusion detection for NSL-KDD flow records.
//!
//! The training pipeline runs, in order:
//!
//! 1. nominal encoding and Min-Max scaling ([`preprocess`]),
//! 2. minority-class oversampling,
//! 3. an undercomplete autoencoder to 25 dimensions ([`autoencoder`]),
//! 4. mean-shift clustering of the codes ([`meanshift`]),
//! 5. a deep network and a one-vs-rest linear SVM per cluster, keeping the
//!    one with the better cross-validated accuracy ([`ensemble`]),
//! 6. a single-layer network over the membership-weighted cluster outputs.

pub mod autoencoder;
pub mod cli;
pub mod config;
pub mod container;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod meanshift;
pub mod nn;
pub mod preprocess;
pub mod seed;
pub mod svm;
pub mod synthetic;

pub use error::{Error, Result};
pub use ingest::{ClassLabel, RawRecord};
