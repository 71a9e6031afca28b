//! Coreset selection driven by node-level structural entropy.
//!
//! The pipeline builds a cosine kNN graph over sample embeddings, fits an
//! encoding tree by greedy community merging, scores each sample by how much
//! its edges bridge distant communities, blends that with training difficulty,
//! and picks a budgeted subset by importance-biased blue-noise sampling.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coverage;
pub mod dataset;
pub mod entropy;
pub mod error;
pub mod graph;
mod lca;
mod par;
pub mod pipeline;
pub mod replay;
pub mod sampler;
pub mod scoring;
pub mod tree;

pub use error::{Error, Result};
pub use par::Execution;
