//! Reverse-mode differentiation over a linear tape.
//!
//! Every primitive evaluates eagerly and appends a node holding its value and
//! the ids of its inputs. Node ids are assigned in creation order, so inputs
//! always precede outputs and a single reverse sweep visits nodes in a valid
//! topological order.

use std::sync::Arc;

use crate::error::{Error, Result};

use super::params::Gradients;
use super::sparse::SparseMatrix;
use super::tensor::gemm;
use super::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    AddRowBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    RowSum(Var),
    Scale(Var, f64),
    AddScalar(Var),
    SquaredFrobenius(Var, Var),
    SoftmaxCrossEntropy(Var, Arc<[usize]>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a named trainable leaf. Its gradient is reported by
    /// [`Tape::backward`] under `name`.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.push((name.into(), v));
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape {
                op,
                lhs: self.shape(a),
                rhs: self.shape(b),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    /// Constant sparse operator times a dense value.
    pub fn sparse_matmul(&mut self, s: &Arc<SparseMatrix>, b: Var) -> Result<Var> {
        let value = s.matmul(self.value(b))?;
        Ok(self.push(value, Op::SparseMatMul(Arc::clone(s), b), &[b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Adds a `1 x C` row vector to every row of an `N x C` value.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (n, c) = self.shape(a);
        if self.shape(bias) != (1, c) {
            return Err(Error::Shape {
                op: "add_row_bias",
                lhs: (n, c),
                rhs: self.shape(bias),
            });
        }
        let mut value = self.value(a).clone();
        let b = self.value(bias).data().to_vec();
        for r in 0..n {
            for (v, bb) in value.row_mut(r).iter_mut().zip(&b) {
                *v += bb;
            }
        }
        Ok(self.push(value, Op::AddRowBias(a, bias), &[a, bias]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).mul(self.value(b))?;
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        self.push(value, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        self.push(value, Op::Log(a), &[a])
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|v| v.clamp(lo, hi));
        self.push(value, Op::Clamp(a, lo, hi), &[a])
    }

    /// Sum of all entries as a `1 x 1` value.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a), &[a])
    }

    pub fn row_sum(&mut self, a: Var) -> Var {
        let value = self.value(a).row_sums();
        self.push(value, Op::RowSum(a), &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a, c), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|v| v + c);
        self.push(value, Op::AddScalar(a), &[a])
    }

    /// `sum((a - b)^2)` as a `1 x 1` value.
    pub fn squared_frobenius(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("squared_frobenius", a, b)?;
        let value = Tensor::scalar(self.value(a).squared_frobenius(self.value(b))?);
        Ok(self.push(value, Op::SquaredFrobenius(a, b), &[a, b]))
    }

    /// Mean over rows of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (n, c) = self.shape(logits);
        if labels.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let x = self.value(logits);
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = x.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let value = Tensor::scalar(if n == 0 { 0.0 } else { total / n as f64 });
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy(logits, labels.into()),
            &[logits],
        ))
    }

    /// Reverse sweep from a `1 x 1` output. Every registered parameter gets
    /// an entry; parameters that did not influence the output get zeros.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let shape = self.shape(output);
        if shape != (1, 1) {
            return Err(Error::NonScalarOutput(shape));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(1.0));

        for id in (0..=output.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads);
        }

        let mut out = Gradients::default();
        for (name, v) in &self.params {
            let g = grads[..]
                .get(v.0)
                .and_then(|g| g.clone())
                .unwrap_or_else(|| {
                    let (r, c) = self.shape(*v);
                    Tensor::zeros(r, c)
                });
            out.insert(name.clone(), g);
        }
        Ok(out)
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(a), self.value(b));
                if self.wants(a) {
                    accumulate_gemm(grads, a, g, false, bv, true);
                }
                if self.wants(b) {
                    accumulate_gemm(grads, b, av, true, g, false);
                }
            }
            Op::SparseMatMul(ref s, b) => {
                if self.wants(b) {
                    let d = s.transpose_matmul(g).expect("shapes checked on forward");
                    accumulate(grads, b, d);
                }
            }
            Op::Add(a, b) => {
                if self.wants(a) {
                    accumulate(grads, a, g.clone());
                }
                if self.wants(b) {
                    accumulate(grads, b, g.clone());
                }
            }
            Op::AddRowBias(a, bias) => {
                if self.wants(a) {
                    accumulate(grads, a, g.clone());
                }
                if self.wants(bias) {
                    accumulate(grads, bias, g.column_sums());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(a) {
                    accumulate(grads, a, g.clone());
                }
                if self.wants(b) {
                    accumulate(grads, b, g.scale(-1.0));
                }
            }
            Op::Mul(a, b) => {
                if self.wants(a) {
                    accumulate(grads, a, g.mul(self.value(b)).unwrap());
                }
                if self.wants(b) {
                    accumulate(grads, b, g.mul(self.value(a)).unwrap());
                }
            }
            Op::Relu(a) => {
                let d = g.zip_map(out, "relu", |gv, o| if o > 0.0 { gv } else { 0.0 });
                accumulate(grads, a, d.unwrap());
            }
            Op::Exp(a) => accumulate(grads, a, g.mul(out).unwrap()),
            Op::Log(a) => {
                let d = g.zip_map(self.value(a), "log", |gv, x| gv / x);
                accumulate(grads, a, d.unwrap());
            }
            Op::Clamp(a, lo, hi) => {
                let d = g.zip_map(self.value(a), "clamp", |gv, x| {
                    if (lo..=hi).contains(&x) {
                        gv
                    } else {
                        0.0
                    }
                });
                accumulate(grads, a, d.unwrap());
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(a);
                accumulate(grads, a, Tensor::filled(r, c, g.item()));
            }
            Op::RowSum(a) => {
                let (r, c) = self.shape(a);
                let mut d = Tensor::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    d.row_mut(i).iter_mut().for_each(|v| *v = gi);
                }
                accumulate(grads, a, d);
            }
            Op::Scale(a, c) => accumulate(grads, a, g.scale(c)),
            Op::AddScalar(a) => accumulate(grads, a, g.clone()),
            Op::SquaredFrobenius(a, b) => {
                let gs = g.item();
                let diff = self.value(a).sub(self.value(b)).unwrap();
                if self.wants(a) {
                    accumulate(grads, a, diff.scale(2.0 * gs));
                }
                if self.wants(b) {
                    accumulate(grads, b, diff.scale(-2.0 * gs));
                }
            }
            Op::SoftmaxCrossEntropy(logits, ref labels) => {
                let x = self.value(logits);
                let n = x.rows();
                let coef = g.item() / n.max(1) as f64;
                let mut d = Tensor::zeros(x.rows(), x.cols());
                for (r, &label) in labels.iter().enumerate() {
                    let row = x.row(r);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
                    for (c, (dv, v)) in d.row_mut(r).iter_mut().zip(row).enumerate() {
                        let p = (v - max).exp() / z;
                        *dv = coef * (p - if c == label { 1.0 } else { 0.0 });
                    }
                }
                accumulate(grads, logits, d);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, d: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(d.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(d),
    }
}

fn accumulate_gemm(
    grads: &mut [Option<Tensor>],
    v: Var,
    a: &Tensor,
    trans_a: bool,
    b: &Tensor,
    trans_b: bool,
) {
    let m = if trans_a { a.cols() } else { a.rows() };
    let n = if trans_b { b.rows() } else { b.cols() };
    match &mut grads[v.0] {
        Some(existing) => gemm(a, trans_a, b, trans_b, existing, 1.0),
        slot @ None => {
            let mut t = Tensor::zeros(m, n);
            gemm(a, trans_a, b, trans_b, &mut t, 0.0);
            *slot = Some(t);
        }
    }
}
