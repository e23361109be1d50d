//! Unsupervised image segmentation over vision-transformer patch features.
//!
//! Each image is handled independently: patch embeddings are turned into a
//! thresholded cosine-similarity graph, a small ARMA graph network is trained
//! on that graph against a modularity-maximization loss, and the resulting
//! two-way node clustering is painted back to a full-resolution binary mask.
//!
//! The main entry points are [`pipeline::run_image`] for a single feature
//! file and [`eval::evaluate_dataset`] for a directory of them. The runnable
//! programs under `examples/` walk through each stage on its own.

pub mod arma;
pub mod autodiff;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod objective;
pub mod optim;
pub mod pipeline;
pub mod sparse;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
