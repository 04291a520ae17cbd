//! Message-passing encoder producing the embedding stack `H^(0..L)`.
//!
//! GCN layer: `h'_i = relu(W^T (h_i / (d_i+1) + sum_j h_j / sqrt((d_i+1)(d_j+1))))`.
//! GIN layer: `h'_i = FNN(h_i + sum_j h_j)` with a two-layer FNN and no outer
//! activation.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{ParamVars, ParameterStore, SparseMatrix, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{Graph, Permutation};
use crate::nn;

/// Input features at or above this fraction of zeros take the sparse path.
pub const SPARSE_FEATURE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Gcn,
    Gin,
}

impl std::str::FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(LayerKind::Gcn),
            "gin" => Ok(LayerKind::Gin),
            other => Err(Error::Config(format!("unknown layer kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub layer_kind: LayerKind,
    /// Channel widths `C_0..C_L`; `C_0` is the input feature width.
    pub dims: Vec<usize>,
}

impl EncoderConfig {
    pub fn new(layer_kind: LayerKind, dims: Vec<usize>) -> Result<Self> {
        let cfg = EncoderConfig { layer_kind, dims };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::Config(format!(
                "encoder needs at least one layer, got dims {:?}",
                self.dims
            )));
        }
        if self.dims.contains(&0) {
            return Err(Error::Config(format!("encoder dims must be positive, got {:?}", self.dims)));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    /// Scaled-uniform weights, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParameterStore> {
        self.validate()?;
        let mut store = ParameterStore::new();
        for l in 0..self.num_layers() {
            let (c_in, c_out) = (self.dims[l], self.dims[l + 1]);
            match self.layer_kind {
                LayerKind::Gcn => store.insert(gcn_weight_name(l), Tensor::glorot(c_in, c_out, rng)),
                LayerKind::Gin => nn::init_mlp(&mut store, &gin_prefix(l), &[c_in, c_out, c_out], rng)?,
            }
        }
        Ok(store)
    }
}

pub fn gcn_weight_name(layer: usize) -> String {
    format!("enc.{layer}.w")
}

pub fn gin_prefix(layer: usize) -> String {
    format!("enc.{layer}")
}

/// Sparse neighborhood operators of one graph, built once and shared by
/// every forward pass.
#[derive(Debug, Clone)]
pub struct GraphOps {
    /// Symmetric-normalized adjacency with implicit self-loops.
    pub gcn: Arc<SparseMatrix>,
    /// `I + A`.
    pub sum: Arc<SparseMatrix>,
    /// `(I + A) / (d + 1)` row-wise.
    pub mean: Arc<SparseMatrix>,
}

impl GraphOps {
    pub fn new(g: &Graph) -> Self {
        let d = |i: usize| g.degree(i) as f64 + 1.0;
        GraphOps {
            gcn: Arc::new(SparseMatrix::closed_neighborhood(g, |i, j| 1.0 / (d(i) * d(j)).sqrt())),
            sum: Arc::new(SparseMatrix::closed_neighborhood(g, |_, _| 1.0)),
            mean: Arc::new(SparseMatrix::closed_neighborhood(g, |i, _| 1.0 / d(i))),
        }
    }
}

/// A graph with its node features, ready for repeated forward passes.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub graph: Graph,
    pub features: Tensor,
    /// Present when the features are sparse enough to skip dense products
    /// in the first layer.
    pub sparse_features: Option<Arc<SparseMatrix>>,
    pub ops: GraphOps,
}

impl GraphInput {
    pub fn new(graph: Graph, features: Tensor) -> Result<Self> {
        if features.rows() != graph.node_count() {
            return Err(Error::SizeMismatch {
                expected: graph.node_count(),
                actual: features.rows(),
            });
        }
        let sparse_features = (features.sparsity() >= SPARSE_FEATURE_THRESHOLD)
            .then(|| Arc::new(SparseMatrix::from_dense(&features)));
        let ops = GraphOps::new(&graph);
        Ok(GraphInput {
            graph,
            features,
            sparse_features,
            ops,
        })
    }

    /// Forces the dense first-layer path.
    pub fn dense_only(mut self) -> Self {
        self.sparse_features = None;
        self
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Block-diagonal combination of several inputs; also returns the first
    /// node index of each block. Every loss term is a sum of per-node terms
    /// over closed neighborhoods, so the loss of the union is the sum of the
    /// per-graph losses.
    pub fn disjoint_union(inputs: &[GraphInput]) -> Result<(GraphInput, Vec<usize>)> {
        let graphs: Vec<Graph> = inputs.iter().map(|i| i.graph.clone()).collect();
        let (graph, offsets) = Graph::disjoint_union(&graphs);
        let features: Vec<Tensor> = inputs.iter().map(|i| i.features.clone()).collect();
        let x = Tensor::vstack(&features)?;
        Ok((GraphInput::new(graph, x)?, offsets))
    }

    /// Relabels nodes by `p`: the graph is permuted and feature row `i`
    /// moves to row `p[i]`.
    pub fn permute(&self, p: &Permutation) -> Result<GraphInput> {
        let g = self.graph.permute(p)?;
        let x = self.features.permute_rows(p.mapping())?;
        let mut out = GraphInput::new(g, x)?;
        if self.sparse_features.is_none() {
            out.sparse_features = None;
        }
        Ok(out)
    }
}

/// Per-layer node embeddings `H^(0), ..., H^(L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStack {
    pub layers: Vec<Tensor>,
}

impl EmbeddingStack {
    pub fn num_layers(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn layer(&self, l: usize) -> &Tensor {
        &self.layers[l]
    }

    /// `H^(L)`.
    pub fn last(&self) -> &Tensor {
        &self.layers[self.layers.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Tensor::is_finite)
    }

    pub fn permute_rows(&self, mapping: &[usize]) -> Result<EmbeddingStack> {
        let layers = self
            .layers
            .iter()
            .map(|h| h.permute_rows(mapping))
            .collect::<Result<_>>()?;
        Ok(EmbeddingStack { layers })
    }
}

fn gcn_on_tape(tape: &mut Tape, op: &Arc<SparseMatrix>, h: Var, w: Var) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    let agg = tape.sparse_matmul(op, hw)?;
    Ok(tape.relu(agg))
}

fn gin_on_tape(tape: &mut Tape, vars: &ParamVars, op: &Arc<SparseMatrix>, prefix: &str, h: Var) -> Result<Var> {
    let agg = tape.sparse_matmul(op, h)?;
    nn::mlp(tape, vars, prefix, 2, agg)
}

/// Records the encoder on `tape`; returns handles to `H^(0..L)`.
pub fn encode_on_tape(
    tape: &mut Tape,
    input: &GraphInput,
    vars: &ParamVars,
    config: &EncoderConfig,
) -> Result<Vec<Var>> {
    config.validate()?;
    if input.feature_dim() != config.input_dim() {
        return Err(Error::Shape {
            op: "encode",
            lhs: input.features.shape(),
            rhs: (config.input_dim(), config.dims[1]),
        });
    }
    let mut layers = vec![tape.constant(input.features.clone())];
    for l in 0..config.num_layers() {
        let h = layers[l];
        let next = match (config.layer_kind, l, &input.sparse_features) {
            (LayerKind::Gcn, 0, Some(x)) => {
                let xw = tape.sparse_matmul(x, vars.get(&gcn_weight_name(0))?)?;
                let agg = tape.sparse_matmul(&input.ops.gcn, xw)?;
                tape.relu(agg)
            }
            (LayerKind::Gin, 0, Some(x)) => {
                nn::mlp_sparse_input(tape, vars, &gin_prefix(0), 2, Some(&input.ops.sum), x)?
            }
            (LayerKind::Gcn, _, _) => gcn_on_tape(tape, &input.ops.gcn, h, vars.get(&gcn_weight_name(l))?)?,
            (LayerKind::Gin, _, _) => gin_on_tape(tape, vars, &input.ops.sum, &gin_prefix(l), h)?,
        };
        layers.push(next);
    }
    Ok(layers)
}

/// Runs the encoder without recording gradients.
pub fn encode_input(input: &GraphInput, params: &ParameterStore, config: &EncoderConfig) -> Result<EmbeddingStack> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let layers = encode_on_tape(&mut tape, input, &vars, config)?;
    Ok(EmbeddingStack {
        layers: layers.into_iter().map(|v| tape.value(v).clone()).collect(),
    })
}

pub fn encode(g: &Graph, x: &Tensor, params: &ParameterStore, config: &EncoderConfig) -> Result<EmbeddingStack> {
    let input = GraphInput::new(g.clone(), x.clone())?;
    encode_input(&input, params, config)
}

fn check_rows(h: &Tensor, g: &Graph) -> Result<()> {
    if h.rows() != g.node_count() {
        return Err(Error::SizeMismatch {
            expected: g.node_count(),
            actual: h.rows(),
        });
    }
    Ok(())
}

pub fn gcn_layer(h: &Tensor, g: &Graph, w: &Tensor) -> Result<Tensor> {
    check_rows(h, g)?;
    let ops = GraphOps::new(g);
    let mut tape = Tape::new();
    let (hv, wv) = (tape.constant(h.clone()), tape.constant(w.clone()));
    let out = gcn_on_tape(&mut tape, &ops.gcn, hv, wv)?;
    Ok(tape.value(out).clone())
}

/// GIN layer whose FNN is stored under `prefix` in `params`.
pub fn gin_layer(h: &Tensor, g: &Graph, params: &ParameterStore, prefix: &str) -> Result<Tensor> {
    check_rows(h, g)?;
    let ops = GraphOps::new(g);
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let hv = tape.constant(h.clone());
    let out = gin_on_tape(&mut tape, &vars, &ops.sum, prefix, hv)?;
    Ok(tape.value(out).clone())
}

/// Substitute input features for featureless graphs: identity columns.
pub fn identity_features(n: usize) -> Tensor {
    Tensor::identity(n)
}

/// Substitute input features for featureless graph collections: one-hot
/// degree, with degrees `>= cap - 1` sharing the last column.
pub fn degree_one_hot(g: &Graph, cap: usize) -> Tensor {
    let mut x = Tensor::zeros(g.node_count(), cap);
    for i in 0..g.node_count() {
        x.set(i, g.degree(i).min(cap - 1), 1.0);
    }
    x
}
