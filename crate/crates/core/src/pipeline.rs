//! End-to-end drivers: unsupervised training followed by a frozen-embedding
//! downstream task, plus the ablation and sensitivity loops built on them.

use serde::{Deserialize, Serialize};

use crate::data::{CitationDataset, TuDataset};
use crate::diff::{ParameterStore, Tensor};
use crate::encoder::{degree_one_hot, encode_input, identity_features, EmbeddingStack, EncoderConfig, GraphInput};
use crate::error::{Error, Result};
use crate::eval::{
    graph_classify, link_predict, make_graph_split, make_link_split, node_classify, stratified_split, ClassifyReport,
    HeadConfig, LinkReport, LinkSplit, MetricRow, MetricTable, NodeSplit, Ratios, Variant,
};
use crate::training::{train_unsupervised, EpochRecord, TrainConfig, TrainOutcome, TrainReport};

pub const DEFAULT_DEGREE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Node,
    Link,
    Graph,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(Task::Node),
            "link" => Ok(Task::Link),
            "graph" => Ok(Task::Graph),
            other => Err(Error::Config(format!("unknown task `{other}` (expected node, link or graph)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Citation(CitationDataset),
    Tu(TuDataset),
}

impl Dataset {
    pub fn name(&self) -> &str {
        match self {
            Dataset::Citation(d) => &d.name,
            Dataset::Tu(d) => &d.name,
        }
    }
}

/// How node features are obtained for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Features shipped with the dataset; degree one-hot for featureless
    /// graph collections.
    Dataset,
    /// Identity columns (single graphs only).
    Identity,
}

pub fn citation_input(ds: &CitationDataset, graph: Option<&crate::graph::Graph>, mode: FeatureMode) -> Result<GraphInput> {
    let g = graph.unwrap_or(&ds.graph).clone();
    let x = match mode {
        FeatureMode::Dataset => ds.features.clone(),
        FeatureMode::Identity => identity_features(g.node_count()),
    };
    GraphInput::new(g, x)
}

pub fn tu_inputs(ds: &TuDataset, degree_cap: usize) -> Result<Vec<GraphInput>> {
    if degree_cap == 0 {
        return Err(Error::Config("degree cap must be positive".into()));
    }
    ds.graphs
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let x = match &ds.node_features {
                Some(f) => f[k].clone(),
                None => degree_one_hot(g, degree_cap),
            };
            GraphInput::new(g.clone(), x)
        })
        .collect()
}

/// Copy of `config` whose encoder input width and seed are set.
pub fn configured(config: &TrainConfig, input_dim: usize, seed: u64) -> TrainConfig {
    let mut c = config.clone();
    c.encoder.dims[0] = input_dim;
    c.seed = seed;
    c
}

/// The dataset's shipped split, or a stratified fallback.
pub fn node_split(ds: &CitationDataset, seed: u64) -> Result<NodeSplit> {
    match &ds.split {
        Some(s) => Ok(s.clone()),
        None => stratified_split(&ds.labels, &Ratios::NODE_FALLBACK, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTaskResult {
    pub train: TrainReport,
    pub classify: ClassifyReport,
    pub fallback_split: bool,
}

pub fn run_node_task(
    ds: &CitationDataset,
    config: &TrainConfig,
    head: &HeadConfig,
    mode: FeatureMode,
    seed: u64,
) -> Result<NodeTaskResult> {
    let input = citation_input(ds, None, mode)?;
    let cfg = configured(config, input.feature_dim(), seed);
    let out = train_unsupervised(std::slice::from_ref(&input), &cfg, |_| {})?;
    let split = node_split(ds, seed)?;
    let classify = node_classify(out.stacks[0].last(), &ds.labels, &split, head, seed)?;
    Ok(NodeTaskResult {
        train: out.report,
        classify,
        fallback_split: split.fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTaskResult {
    pub train: TrainReport,
    pub link: LinkReport,
}

/// Trains on the graph of training edges only and scores held-out pairs.
pub fn run_link_task(
    ds: &CitationDataset,
    config: &TrainConfig,
    ratios: &Ratios,
    mode: FeatureMode,
    seed: u64,
) -> Result<LinkTaskResult> {
    let (split, train_graph) = make_link_split(&ds.graph, ratios, seed)?;
    let input = citation_input(ds, Some(&train_graph), mode)?;
    let cfg = configured(config, input.feature_dim(), seed);
    let out = train_unsupervised(std::slice::from_ref(&input), &cfg, |_| {})?;
    let link = link_predict(out.stacks[0].last(), &split)?;
    Ok(LinkTaskResult {
        train: out.report,
        link,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTaskResult {
    pub train: TrainReport,
    pub classify: ClassifyReport,
}

pub fn train_on_collection(ds: &TuDataset, config: &TrainConfig, degree_cap: usize, seed: u64) -> Result<TrainOutcome> {
    let inputs = tu_inputs(ds, degree_cap)?;
    let width = inputs.first().map_or(0, GraphInput::feature_dim);
    let cfg = configured(config, width, seed);
    train_unsupervised(&inputs, &cfg, |_| {})
}

pub fn run_graph_task(
    ds: &TuDataset,
    config: &TrainConfig,
    head: &HeadConfig,
    ratios: &Ratios,
    degree_cap: usize,
    seed: u64,
) -> Result<GraphTaskResult> {
    let out = train_on_collection(ds, config, degree_cap, seed)?;
    let split = make_graph_split(ds.graphs.len(), ratios, seed)?;
    let classify = graph_classify(&out.stacks, &ds.labels, &split, head, seed)?;
    Ok(GraphTaskResult {
        train: out.report,
        classify,
    })
}

/// Everything a downstream run needs besides the dataset and loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task: Task,
    pub train: TrainConfig,
    pub head: HeadConfig,
    pub ratios: Option<Ratios>,
    pub features: FeatureMode,
    pub degree_cap: usize,
}

impl TaskSpec {
    pub fn metric_name(&self) -> &'static str {
        match self.task {
            Task::Link => "auc",
            Task::Node | Task::Graph => "accuracy",
        }
    }

    /// Graphs the model is trained on. Link tasks hold out edges first, so
    /// the returned split must be used for scoring.
    pub fn prepare(&self, ds: &Dataset, seed: u64) -> Result<Prepared> {
        match (self.task, ds) {
            (Task::Node, Dataset::Citation(d)) => Ok(Prepared {
                inputs: vec![citation_input(d, None, self.features)?],
                link_split: None,
            }),
            (Task::Link, Dataset::Citation(d)) => {
                let (split, train_graph) = make_link_split(&d.graph, &self.ratios.unwrap_or(Ratios::LINK), seed)?;
                Ok(Prepared {
                    inputs: vec![citation_input(d, Some(&train_graph), self.features)?],
                    link_split: Some(split),
                })
            }
            (Task::Graph, Dataset::Tu(d)) => Ok(Prepared {
                inputs: tu_inputs(d, self.degree_cap)?,
                link_split: None,
            }),
            (task, _) => Err(Error::Config(format!(
                "task {task:?} does not apply to dataset `{}`",
                ds.name()
            ))),
        }
    }

    pub fn train(&self, prepared: &Prepared, seed: u64, on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
        let width = prepared.inputs.first().map_or(0, GraphInput::feature_dim);
        train_unsupervised(&prepared.inputs, &configured(&self.train, width, seed), on_epoch)
    }

    /// Test metric of frozen embeddings. `split_seed` draws node and graph
    /// splits, `head_seed` initializes the classifier.
    pub fn evaluate(
        &self,
        ds: &Dataset,
        prepared: &Prepared,
        stacks: &[EmbeddingStack],
        split_seed: u64,
        head_seed: u64,
    ) -> Result<f64> {
        let last = || stacks.first().map(EmbeddingStack::last).ok_or_else(|| Error::InvalidInput("no embeddings".into()));
        match (self.task, ds) {
            (Task::Node, Dataset::Citation(d)) => {
                let split = node_split(d, split_seed)?;
                Ok(node_classify(last()?, &d.labels, &split, &self.head, head_seed)?.test_accuracy)
            }
            (Task::Link, Dataset::Citation(_)) => {
                let split = prepared
                    .link_split
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("link evaluation needs the held-out split".into()))?;
                Ok(link_predict(last()?, split)?.test_auc)
            }
            (Task::Graph, Dataset::Tu(d)) => {
                let split = make_graph_split(d.graphs.len(), &self.ratios.unwrap_or(Ratios::GRAPH), split_seed)?;
                Ok(graph_classify(stacks, &d.labels, &split, &self.head, head_seed)?.test_accuracy)
            }
            (task, _) => Err(Error::Config(format!(
                "task {task:?} does not apply to dataset `{}`",
                ds.name()
            ))),
        }
    }

    /// Test metric of one full run: split, train and evaluate with `seed`.
    pub fn run(&self, ds: &Dataset, seed: u64) -> Result<f64> {
        let prepared = self.prepare(ds, seed)?;
        let out = self.train(&prepared, seed, |_| {})?;
        self.evaluate(ds, &prepared, &out.stacks, seed, seed)
    }
}

/// Training graphs plus the held-out link split, if any.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub inputs: Vec<GraphInput>,
    pub link_split: Option<LinkSplit>,
}

/// Noise-free embeddings of each training graph under `params`.
pub fn embed(prepared: &Prepared, params: &ParameterStore, encoder: &EncoderConfig) -> Result<Vec<EmbeddingStack>> {
    prepared.inputs.iter().map(|i| encode_input(i, params, encoder)).collect()
}

/// Applies `f` to every seed, optionally one thread per seed. Results keep
/// seed order and do not depend on the threading.
pub fn run_seeds<F>(seeds: &[u64], parallel: bool, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if !parallel {
        return seeds.iter().map(|&s| f(s)).collect();
    }
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds.iter().map(|&s| scope.spawn(move || f(s))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    })
}

/// Mean and spread of the test metric over `seeds` for each loss variant.
pub fn run_ablation(
    ds: &Dataset,
    spec: &TaskSpec,
    variants: &[Variant],
    seeds: &[u64],
    parallel: bool,
) -> Result<MetricTable> {
    let mut table = MetricTable::default();
    for &v in variants {
        let (nei, deg) = v.lambdas(spec.train.lambda_nei, spec.train.lambda_deg);
        let mut s = spec.clone();
        s.train.lambda_nei = nei;
        s.train.lambda_deg = deg;
        let values = run_seeds(seeds, parallel, |seed| s.run(ds, seed))?;
        table.push(MetricRow::new(v.name(), ds.name(), spec.metric_name(), values));
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTarget {
    LambdaNei,
    LambdaDeg,
}

/// One row per value of the swept loss weight.
pub fn lambda_sweep(
    ds: &Dataset,
    spec: &TaskSpec,
    target: SweepTarget,
    values: &[f64],
    seeds: &[u64],
    parallel: bool,
) -> Result<MetricTable> {
    let mut table = MetricTable::default();
    for &value in values {
        let mut s = spec.clone();
        let label = match target {
            SweepTarget::LambdaNei => {
                s.train.lambda_nei = value;
                format!("lambda_nei={value}")
            }
            SweepTarget::LambdaDeg => {
                s.train.lambda_deg = value;
                format!("lambda_deg={value}")
            }
        };
        let metrics = run_seeds(seeds, parallel, |seed| s.run(ds, seed))?;
        table.push(MetricRow::new(&label, ds.name(), spec.metric_name(), metrics));
    }
    Ok(table)
}

/// Final-layer embeddings of a trained model, per graph.
pub fn final_embeddings(out: &TrainOutcome) -> Vec<Tensor> {
    out.stacks.iter().map(|s| s.last().clone()).collect()
}
