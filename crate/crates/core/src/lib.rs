//! Heterogeneous recommendation with unified item representations.
//!
//! Items of different kinds (books, music, movies, ...) live in different
//! attribute spaces. Per-kind mapping networks project them into one unified
//! space; a two-tower model scores user-item pairs there. Training combines
//! three terms: binary cross entropy over labeled interactions, a kernel
//! mean-embedding alignment loss pulling the per-kind representation
//! distributions together, and a second-order topology loss preserving each
//! kind's raw covariance structure.
//!
//! Everything is `f64` and deterministic given a seed: model initialization,
//! splits, batch order, and the optimizer trajectory are reproducible
//! bit-for-bit, and checkpoints roundtrip exactly.
//!
//! Module map:
//!
//! * [`tensor`], [`sparse`], [`autodiff`] — dense matrices, sparse
//!   interaction rows, and the reverse-mode engine with Adam and a
//!   finite-difference checker;
//! * [`data`] — loading, encoding, splitting, sampling, synthesis;
//! * [`kernel`], [`topology`] — the alignment loss with its brute-force
//!   oracle, and the covariance-matching topology loss;
//! * [`model`] — mapping nets, towers, readout, and step-graph assembly;
//! * [`train`] — the fit loop, early stopping, checkpoints;
//! * [`eval`] — AUC reports, k-means/pairwise-F1 protocol, export;
//! * [`verify`] — self-check suites used by tests and the CLI.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod model;
pub mod sparse;
pub mod tensor;
pub mod topology;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use sparse::SparseVector;
pub use tensor::DenseMatrix;
