use crate::error::{Error, Result};
use crate::graph::Graph;

use super::Tensor;

/// Sparse matrix built from coordinate triplets and stored row-compressed.
///
/// Entries within a row are kept in ascending column order, which fixes the
/// summation order of every product.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<_> = entries.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        for w in sorted.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::InvalidInput(format!(
                    "duplicate sparse entry ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        for &(r, c, v) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::InvalidInput(format!(
                    "sparse entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Keeps the non-zero entries of a dense matrix.
    pub fn from_dense(t: &Tensor) -> Self {
        let mut row_ptr = Vec::with_capacity(t.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..t.rows() {
            for (c, &v) in t.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            rows: t.rows(),
            cols: t.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Operator with entries `weight(i, j)` for every `j` in the closed
    /// neighborhood of `i` (self included).
    pub fn closed_neighborhood(g: &Graph, weight: impl Fn(usize, usize) -> f64) -> Self {
        let n = g.node_count();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(n + 2 * g.edge_count());
        let mut values = Vec::with_capacity(n + 2 * g.edge_count());
        row_ptr.push(0);
        for i in 0..n {
            let neigh = g.neighbors(i);
            let split = neigh.partition_point(|&j| j < i);
            for &j in neigh[..split].iter().chain(std::iter::once(&i)).chain(&neigh[split..]) {
                col_idx.push(j);
                values.push(weight(i, j));
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Coordinate triplets in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.rows, self.cols);
        for (r, c, v) in self.entries() {
            out.set(r, c, v);
        }
        out
    }

    /// `self * dense`.
    pub fn matmul(&self, dense: &Tensor) -> Result<Tensor> {
        if self.cols != dense.rows() {
            return Err(Error::Shape {
                op: "sparse_dense_matmul",
                lhs: self.shape(),
                rhs: dense.shape(),
            });
        }
        let width = dense.cols();
        let mut out = Tensor::zeros(self.rows, width);
        for r in 0..self.rows {
            let acc = out.row_mut(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                for (o, &d) in acc.iter_mut().zip(dense.row(self.col_idx[k])) {
                    *o += v * d;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * dense`, scattering row by row.
    pub fn transpose_matmul(&self, dense: &Tensor) -> Result<Tensor> {
        if self.rows != dense.rows() {
            return Err(Error::Shape {
                op: "sparse_transpose_matmul",
                lhs: (self.cols, self.rows),
                rhs: dense.shape(),
            });
        }
        let width = dense.cols();
        let mut out = Tensor::zeros(self.cols, width);
        for r in 0..self.rows {
            let src = dense.row(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                for (o, &d) in out.row_mut(self.col_idx[k]).iter_mut().zip(src) {
                    *o += v * d;
                }
            }
        }
        Ok(out)
    }
}
