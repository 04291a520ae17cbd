//! Downstream evaluation of frozen embeddings: node classification, link
//! prediction and graph classification, plus the splits and metric tables
//! they rely on.

mod head;
mod metrics;
mod split;

use serde::{Deserialize, Serialize};

pub use head::{ClassifyReport, HeadConfig, MlpHead, Partition};
pub use metrics::{accuracy, auc, graph_embedding, link_scores, mean_std};
pub use split::{make_graph_split, make_link_split, stratified_split, GraphSplit, LinkSplit, NodeSplit, Ratios};

use crate::diff::Tensor;
use crate::encoder::EmbeddingStack;
use crate::error::{Error, Result};

/// Trains an MLP head on `H^(L)` rows and reports per-partition accuracy.
pub fn node_classify(
    h: &Tensor,
    labels: &[usize],
    split: &NodeSplit,
    config: &HeadConfig,
    seed: u64,
) -> Result<ClassifyReport> {
    if labels.len() != h.rows() {
        return Err(Error::SizeMismatch {
            expected: h.rows(),
            actual: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    let part = Partition {
        train: &split.train,
        val: &split.val,
        test: &split.test,
    };
    Ok(MlpHead::fit(h, labels, classes, part, config, seed)?.1)
}

/// One summed embedding row per graph.
pub fn graph_embeddings(stacks: &[EmbeddingStack]) -> Result<Tensor> {
    let rows = stacks
        .iter()
        .map(|s| graph_embedding(s.last()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tensor::from_rows(&rows))
}

/// Rescales each column to zero mean and unit variance using only the
/// statistics of the `fit_rows`. Constant columns are centred but not scaled.
pub fn standardize_columns(h: &Tensor, fit_rows: &[usize]) -> Result<Tensor> {
    if fit_rows.is_empty() {
        return Err(Error::InvalidInput("standardization needs at least one row".into()));
    }
    if let Some(&bad) = fit_rows.iter().find(|&&i| i >= h.rows()) {
        return Err(Error::InvalidInput(format!("row {bad} out of range for {} rows", h.rows())));
    }
    let n = fit_rows.len() as f64;
    let mut out = h.clone();
    for j in 0..h.cols() {
        let mean = fit_rows.iter().map(|&i| h.get(i, j)).sum::<f64>() / n;
        let var = fit_rows.iter().map(|&i| (h.get(i, j) - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..h.rows() {
            out.set(i, j, (h.get(i, j) - mean) / scale);
        }
    }
    Ok(out)
}

/// Graph-level head on summed readouts. Sums grow with graph size, so the
/// columns are standardized with training-graph statistics before the head.
pub fn graph_classify(
    stacks: &[EmbeddingStack],
    labels: &[usize],
    split: &GraphSplit,
    config: &HeadConfig,
    seed: u64,
) -> Result<ClassifyReport> {
    let h = standardize_columns(&graph_embeddings(stacks)?, &split.train)?;
    node_classify(&h, labels, split, config, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub val_auc: Option<f64>,
    pub test_auc: f64,
}

fn partition_auc(z: &Tensor, pos: &[(usize, usize)], neg: &[(usize, usize)]) -> Result<f64> {
    let mut scores = link_scores(z, pos)?;
    scores.extend(link_scores(z, neg)?);
    let labels: Vec<bool> = (0..scores.len()).map(|k| k < pos.len()).collect();
    auc(&scores, &labels)
}

/// AUC of inner-product scores on the held-out partitions.
pub fn link_predict(z: &Tensor, split: &LinkSplit) -> Result<LinkReport> {
    let val_auc = if split.val_pos.is_empty() {
        None
    } else {
        Some(partition_auc(z, &split.val_pos, &split.val_neg)?)
    };
    Ok(LinkReport {
        val_auc,
        test_auc: partition_auc(z, &split.test_pos, &split.test_neg)?,
    })
}

/// Loss variants compared in ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoNei,
    NoDeg,
    NoDegNoNei,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoNei, Variant::NoDeg, Variant::NoDegNoNei];

    /// Loss weights for this variant given the full-model weights.
    pub fn lambdas(self, lambda_nei: f64, lambda_deg: f64) -> (f64, f64) {
        match self {
            Variant::Full => (lambda_nei, lambda_deg),
            Variant::NoNei => (0.0, lambda_deg),
            Variant::NoDeg => (lambda_nei, 0.0),
            Variant::NoDegNoNei => (0.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoNei => "w/o nei",
            Variant::NoDeg => "w/o deg",
            Variant::NoDegNoNei => "w/o deg & nei",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "no_nei" => Ok(Variant::NoNei),
            "no_deg" => Ok(Variant::NoDeg),
            "no_deg_no_nei" | "none" => Ok(Variant::NoDegNoNei),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub variant: String,
    pub dataset: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
    pub values: Vec<f64>,
}

impl MetricRow {
    pub fn new(variant: &str, dataset: &str, metric: &str, values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        MetricRow {
            variant: variant.to_string(),
            dataset: dataset.to_string(),
            metric: metric.to_string(),
            mean,
            std,
            seeds: values.len(),
            values,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub const HEADER: [&'static str; 6] = ["variant", "dataset", "metric", "mean", "std", "seeds"];

    pub fn push(&mut self, row: MetricRow) {
        self.rows.push(row);
    }

    /// Header line plus one record per row, fields joined by `sep`.
    pub fn to_delimited(&self, sep: char) -> String {
        let s = sep.to_string();
        let mut out = Self::HEADER.join(&s);
        out.push('\n');
        for r in &self.rows {
            let fields = [
                r.variant.clone(),
                r.dataset.clone(),
                r.metric.clone(),
                format!("{:.6}", r.mean),
                format!("{:.6}", r.std),
                r.seeds.to_string(),
            ];
            out.push_str(&fields.join(&s));
            out.push('\n');
        }
        out
    }
}
