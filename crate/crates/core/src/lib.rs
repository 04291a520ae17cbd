//! Isomorphic-consistent variational graph auto-encoder.
//!
//! A message-passing encoder (GCN or GIN) produces the embedding stack
//! `H^(0..L)`. The inverse-GNN decoder walks the stack top-down and, from each
//! aggregated embedding `H^(l+1)`, reconstructs the self-embedding `H^(l)`,
//! a Gaussian over the closed neighborhood of every node, and the node
//! degrees. Training minimizes
//!
//! ```text
//! L = L_self + lambda_nei * L_nei + lambda_deg * L_deg
//! ```
//!
//! and the frozen encoder outputs feed node-, link- and graph-level heads.
//!
//! Module map:
//! - [`graph`]: simple graphs, permutations, k-hop subgraphs, 1-WL and
//!   brute-force isomorphism oracles
//! - [`diff`]: tensors, reverse-mode tape, RNG, Adam, gradient checking
//! - [`encoder`]: GCN / GIN layers and the L-layer encoder
//! - [`decoder`]: the inverse-GNN decoder and its three losses
//! - [`training`]: the unsupervised training loop
//! - [`eval`]: downstream heads, metrics, splits, ablations
//! - [`data`]: dataset loaders, checkpoints, embedding export
//! - [`model`]: encoder and decoder wired into one forward pass
//! - [`config`] / [`pipeline`]: run configuration and end-to-end drivers

pub mod config;
pub mod data;
pub mod decoder;
pub mod diff;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod training;

pub use error::{Error, ErrorKind, Result};
