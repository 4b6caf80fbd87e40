//! Hierarchical message-passing graph neural networks.
//!
//! The crate builds a multi-level community hierarchy over an input graph
//! ([`hierarchy`]), propagates node states bottom-up, within each level and
//! top-down through that hierarchy ([`model`]), and trains the resulting
//! embeddings for node classification, link prediction and community
//! detection ([`tasks`]).
//!
//! Numerical kernels live in [`tensor`]; their row loops go through
//! [`Exec`] and run on rayon when the `parallel` feature is enabled.

pub mod error;
pub mod exec;
pub mod graph;
pub mod hierarchy;
pub mod model;
pub mod tasks;
pub mod tensor;

pub use error::{Error, ErrorKind, Result};
pub use exec::Exec;
