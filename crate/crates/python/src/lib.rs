//! Python bindings: graphs, training, embeddings, gradient checks and
//! configuration-driven runs. Matrices cross the boundary as lists of rows
//! (NumPy 2-D arrays are accepted on input).

pub mod convert;

use std::path::PathBuf;

use isoc_vgae::config::RunConfig;
use isoc_vgae::data::{load_checkpoint, save_checkpoint};
use isoc_vgae::decoder::LossBreakdown;
use isoc_vgae::diff::{ParameterStore, RngState};
use isoc_vgae::encoder::{encode_input, EncoderConfig, GraphInput};
use isoc_vgae::eval::{self, MetricRow};
use isoc_vgae::graph::{self, wl_refine, Permutation};
use isoc_vgae::model::{evaluate_loss, gradcheck_instance, gradient_check, ModelConfig, NOISE_STREAM};
use isoc_vgae::pipeline::{configured, run_seeds};
use isoc_vgae::training::{train_unsupervised, TrainConfig, TrainReport};
use isoc_vgae::{Error, ErrorKind};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;

use convert::{tensor_from_rows, tensor_to_rows};

fn py_err(e: Error) -> PyErr {
    match (&e, e.kind()) {
        (Error::Io { .. } | Error::Parse { .. } | Error::Data { .. } | Error::Checkpoint(_), _) => {
            PyOSError::new_err(e.to_string())
        }
        (_, ErrorKind::Numerical) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for isoc_vgae::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Simple undirected graph.
#[pyclass(module = "isoc_vgae_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Graph {
    inner: graph::Graph,
}

#[pymethods]
impl Graph {
    #[new]
    fn new(node_count: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Graph {
            inner: graph::Graph::new(node_count, &edges).py()?,
        })
    }

    #[staticmethod]
    fn path(n: usize) -> Self {
        Graph {
            inner: graph::Graph::path(n),
        }
    }

    /// Erdős–Rényi graph with edge probability `p`.
    #[staticmethod]
    fn random(n: usize, p: f64, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Graph {
            inner: graph::Graph::random(n, p, &mut rng),
        }
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees().to_vec()
    }

    /// Relabels node `i` as `mapping[i]`.
    fn permute(&self, mapping: Vec<usize>) -> PyResult<Self> {
        let p = Permutation::new(mapping).py()?;
        Ok(Graph {
            inner: self.inner.permute(&p).py()?,
        })
    }

    /// 1-WL colors after `rounds` refinements from a uniform start.
    fn wl_colors(&self, rounds: usize) -> PyResult<Vec<usize>> {
        Ok(wl_refine(&self.inner, &vec![0; self.inner.node_count()], rounds).py()?.colors)
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

fn graph_input(g: &Graph, features: &[Vec<f64>]) -> PyResult<GraphInput> {
    GraphInput::new(g.inner.clone(), tensor_from_rows(features).py()?).py()
}

fn loss_dict<'py>(py: Python<'py>, b: &LossBreakdown) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("l_self", b.l_self)?;
    d.set_item("l_nei", b.l_nei)?;
    d.set_item("l_deg", b.l_deg)?;
    d.set_item("total", b.total)?;
    Ok(d)
}

/// Trained encoder and decoder parameters.
#[pyclass(module = "isoc_vgae_py", frozen)]
struct Model {
    config: TrainConfig,
    params: ParameterStore,
    report: Option<TrainReport>,
    rng: RngState,
}

#[pymethods]
impl Model {
    /// Trains on one graph. `dims` are the encoder output widths.
    /// `on_epoch(epoch, losses)` is called after every epoch when given.
    #[staticmethod]
    #[pyo3(signature = (
        graph, features, *, layer = "gcn", dims = vec![512, 512], decoder_hidden = 512,
        lambda_nei = 0.1, lambda_deg = 1.0, learning_rate = 1e-3, max_epochs = 500,
        patience = 20, tolerance = 1e-4, seed = 0, on_epoch = None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        graph: &Graph,
        features: Vec<Vec<f64>>,
        layer: &str,
        dims: Vec<usize>,
        decoder_hidden: usize,
        lambda_nei: f64,
        lambda_deg: f64,
        learning_rate: f64,
        max_epochs: usize,
        patience: usize,
        tolerance: f64,
        seed: u64,
        on_epoch: Option<Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let input = graph_input(graph, &features)?;
        let base = convert::train_config(
            layer, &dims, decoder_hidden, lambda_nei, lambda_deg, learning_rate, max_epochs, patience, tolerance, seed,
        )
        .py()?;
        let config = configured(&base, input.feature_dim(), seed);
        let mut callback_error = None;
        let out = train_unsupervised(std::slice::from_ref(&input), &config, |r| {
            let Some(cb) = &on_epoch else { return };
            if callback_error.is_some() {
                return;
            }
            let b = LossBreakdown::new(r.l_self, r.l_nei, r.l_deg, config.lambda_nei, config.lambda_deg);
            if let Err(e) = loss_dict(py, &b).and_then(|d| cb.call1((r.epoch, d))) {
                callback_error = Some(e);
            }
        })
        .py()?;
        if let Some(e) = callback_error {
            return Err(e);
        }
        Ok(Model {
            config,
            params: out.params,
            report: Some(out.report),
            rng: out.rng,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ckpt = load_checkpoint(&path).py()?;
        let config: TrainConfig = serde_json::from_value(ckpt.config)
            .map_err(|e| PyValueError::new_err(format!("checkpoint config is not a training config: {e}")))?;
        config.model().check_params(&ckpt.params).py()?;
        Ok(Model {
            config,
            params: ckpt.params,
            report: None,
            rng: ckpt.rng,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.params, &self.config, &self.rng, &path).py()
    }

    /// Per-epoch losses of the training run; empty for loaded models.
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.report
            .iter()
            .flat_map(|r| &r.history)
            .map(|b| loss_dict(py, b))
            .collect()
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.report.as_ref().map_or(0, |r| r.epochs)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.report
            .as_ref()
            .is_some_and(|r| r.stop_reason == isoc_vgae::training::StopReason::Converged)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.config.encoder.dims.clone()
    }

    /// Embedding stack `[H0, H1, ..., HL]`, each a list of rows.
    fn embed(&self, graph: &Graph, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let input = graph_input(graph, &features)?;
        let stack = encode_input(&input, &self.params, &self.config.encoder).py()?;
        Ok(stack.layers.iter().map(tensor_to_rows).collect())
    }

    /// Loss terms for `graph` with decoder noise drawn from `seed`.
    fn loss<'py>(&self, py: Python<'py>, graph: &Graph, features: Vec<Vec<f64>>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let input = graph_input(graph, &features)?;
        let model = self.config.model();
        let noise = model.sample_noise(input.node_count(), &mut RngState::new(seed).fork(NOISE_STREAM));
        let b = evaluate_loss(&model, &input, &self.params, &noise, self.config.lambda_nei, self.config.lambda_deg)
            .py()?;
        loss_dict(py, &b)
    }

    fn parameter_names(&self) -> Vec<String> {
        self.params.names().cloned().collect()
    }

    fn parameter(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(tensor_to_rows(self.params.get(name).py()?))
    }
}

/// Finite-difference gradient check on a random graph.
#[pyfunction]
#[pyo3(signature = (*, nodes = 12, edge_prob = 0.3, layers = 2, dim = 8, decoder_hidden = 8,
    layer = "gcn", lambda_nei = 0.1, lambda_deg = 1.0, seed = 0, step = 1e-6, tolerance = 1e-4))]
#[allow(clippy::too_many_arguments)]
fn gradcheck<'py>(
    py: Python<'py>,
    nodes: usize,
    edge_prob: f64,
    layers: usize,
    dim: usize,
    decoder_hidden: usize,
    layer: &str,
    lambda_nei: f64,
    lambda_deg: f64,
    seed: u64,
    step: f64,
    tolerance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let model = ModelConfig {
        encoder: EncoderConfig::new(convert::layer_kind(layer).py()?, vec![dim; layers + 1]).py()?,
        decoder_hidden,
    };
    model.validate().py()?;
    let (input, params, noise) = gradcheck_instance(nodes, edge_prob, &model, seed).py()?;
    let r = gradient_check(&model, &input, &params, &noise, (lambda_nei, lambda_deg), step, tolerance).py()?;
    let d = PyDict::new(py);
    d.set_item("passed", r.passed())?;
    d.set_item("max_relative_error", r.max_relative_error())?;
    d.set_item("report", r.to_string())?;
    Ok(d)
}

/// Per-row KL divergence between diagonal Gaussians.
#[pyfunction]
fn kl_diag_gaussian(
    mu_q: Vec<Vec<f64>>,
    sigma_q: Vec<Vec<f64>>,
    mu_p: Vec<Vec<f64>>,
    sigma_p: Vec<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let t = |m: &[Vec<f64>]| tensor_from_rows(m).py();
    isoc_vgae::decoder::kl_diag_gaussian(&t(&mu_q)?, &t(&sigma_q)?, &t(&mu_p)?, &t(&sigma_p)?).py()
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::auc(&scores, &labels).py()
}

/// Inner-product scores of node pairs.
#[pyfunction]
fn link_scores(z: Vec<Vec<f64>>, pairs: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
    eval::link_scores(&tensor_from_rows(&z).py()?, &pairs).py()
}

/// Runs the task described by a TOML configuration over its seeds and
/// returns the metric summary.
#[pyfunction]
#[pyo3(signature = (config_path, *, seeds = None))]
fn run<'py>(py: Python<'py>, config_path: PathBuf, seeds: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = RunConfig::load(&config_path).py()?;
    if let Some(n) = seeds {
        cfg.eval.seeds = n;
    }
    cfg.validate().py()?;
    let ds = cfg.load_dataset().py()?;
    let spec = cfg.task_spec(&ds).py()?;
    let values = py.detach(|| run_seeds(&cfg.seeds(), false, |s| spec.run(&ds, s))).py()?;
    let row = MetricRow::new("full", ds.name(), spec.metric_name(), values);
    let d = PyDict::new(py);
    d.set_item("dataset", &row.dataset)?;
    d.set_item("metric", &row.metric)?;
    d.set_item("mean", row.mean)?;
    d.set_item("std", row.std)?;
    d.set_item("values", row.values)?;
    Ok(d)
}

#[pymodule]
fn isoc_vgae_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(kl_diag_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(link_scores, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
