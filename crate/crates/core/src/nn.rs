//! Stacks of affine layers with relu between them.
//!
//! Parameters live in a [`ParameterStore`] under `{prefix}.{k}.w` (shape
//! `in x out`) and `{prefix}.{k}.b` (shape `1 x out`). No activation follows
//! the last layer.

use std::sync::Arc;

use rand::Rng;

use crate::diff::{ParamVars, ParameterStore, SparseMatrix, Tape, Tensor, Var};
use crate::error::{Error, Result};

pub fn weight_name(prefix: &str, k: usize) -> String {
    format!("{prefix}.{k}.w")
}

pub fn bias_name(prefix: &str, k: usize) -> String {
    format!("{prefix}.{k}.b")
}

/// Adds an MLP with layer widths `widths[0] -> widths[1] -> ...`; weights are
/// scaled-uniform, biases zero.
pub fn init_mlp<R: Rng + ?Sized>(
    store: &mut ParameterStore,
    prefix: &str,
    widths: &[usize],
    rng: &mut R,
) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::Config(format!(
            "{prefix}: layer widths must be positive and at least two, got {widths:?}"
        )));
    }
    for (k, pair) in widths.windows(2).enumerate() {
        store.insert(weight_name(prefix, k), Tensor::glorot(pair[0], pair[1], rng));
        store.insert(bias_name(prefix, k), Tensor::zeros(1, pair[1]));
    }
    Ok(())
}

fn affine(tape: &mut Tape, vars: &ParamVars, prefix: &str, k: usize, x: Var) -> Result<Var> {
    let xw = tape.matmul(x, vars.get(&weight_name(prefix, k))?)?;
    tape.add_row_bias(xw, vars.get(&bias_name(prefix, k))?)
}

fn tail(tape: &mut Tape, vars: &ParamVars, prefix: &str, layers: usize, mut h: Var) -> Result<Var> {
    for k in 1..layers {
        h = tape.relu(h);
        h = affine(tape, vars, prefix, k, h)?;
    }
    Ok(h)
}

/// Applies the `layers`-layer MLP stored under `prefix` to the rows of `x`.
pub fn mlp(tape: &mut Tape, vars: &ParamVars, prefix: &str, layers: usize, x: Var) -> Result<Var> {
    let h = affine(tape, vars, prefix, 0, x)?;
    tail(tape, vars, prefix, layers, h)
}

/// As [`mlp`] for the input `op * x` with a sparse `x`. The first layer is
/// evaluated as `op * (x W) + b`, which never materializes `x` densely.
pub fn mlp_sparse_input(
    tape: &mut Tape,
    vars: &ParamVars,
    prefix: &str,
    layers: usize,
    op: Option<&Arc<SparseMatrix>>,
    x: &Arc<SparseMatrix>,
) -> Result<Var> {
    let mut h = tape.sparse_matmul(x, vars.get(&weight_name(prefix, 0))?)?;
    if let Some(op) = op {
        h = tape.sparse_matmul(op, h)?;
    }
    let h = tape.add_row_bias(h, vars.get(&bias_name(prefix, 0))?)?;
    tail(tape, vars, prefix, layers, h)
}
