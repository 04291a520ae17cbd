//! Run configuration: one TOML file naming the task, the dataset files and
//! every model, training, head and split setting.
//!
//! ```toml
//! task = "node"
//!
//! [data]
//! format = "edgelist"
//! name = "cora"
//! edges = "cora/cora.edges"
//! features = "cora/cora.features"
//! labels = "cora/cora.labels"
//!
//! [model]
//! dims = [512, 512]
//!
//! [train]
//! max_epochs = 200
//! seed = 7
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_edgelist_dataset, load_tu_dataset, SplitFiles};
use crate::decoder::DEFAULT_DECODER_HIDDEN;
use crate::encoder::{EncoderConfig, LayerKind};
use crate::error::{Error, Result};
use crate::eval::{HeadConfig, Ratios};
use crate::pipeline::{Dataset, FeatureMode, Task, TaskSpec, DEFAULT_DEGREE_CAP};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// Single graph: edge list, feature rows, labels, optional split files.
    Edgelist {
        name: String,
        edges: PathBuf,
        features: PathBuf,
        labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        splits: Option<SplitFiles>,
    },
    /// Graph collection in the flat TU text layout, files `dir/name_*.txt`.
    Tu { name: String, dir: PathBuf },
}

impl DataSource {
    pub fn name(&self) -> &str {
        match self {
            DataSource::Edgelist { name, .. } | DataSource::Tu { name, .. } => name,
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            DataSource::Edgelist {
                edges,
                features,
                labels,
                splits,
                ..
            } => {
                let mut v = vec![edges, features, labels];
                if let Some(s) = splits {
                    v.extend([&mut s.train, &mut s.val, &mut s.test]);
                }
                v
            }
            DataSource::Tu { dir, .. } => vec![dir],
        }
    }

    fn required_files(&self) -> Vec<PathBuf> {
        match self {
            DataSource::Edgelist {
                edges,
                features,
                labels,
                splits,
                ..
            } => {
                let mut v = vec![edges.clone(), features.clone(), labels.clone()];
                if let Some(s) = splits {
                    v.extend([s.train.clone(), s.val.clone(), s.test.clone()]);
                }
                v
            }
            DataSource::Tu { name, dir } => ["A", "graph_indicator", "graph_labels"]
                .iter()
                .map(|s| dir.join(format!("{name}_{s}.txt")))
                .collect(),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Edgelist {
                name,
                edges,
                features,
                labels,
                splits,
            } => Ok(Dataset::Citation(load_edgelist_dataset(
                name,
                edges,
                features,
                labels,
                splits.as_ref(),
            )?)),
            DataSource::Tu { name, dir } => Ok(Dataset::Tu(load_tu_dataset(dir, name)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Defaults to GCN for node and link tasks, GIN for graph tasks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<LayerKind>,
    /// Output widths `C_1..C_L`; the input width comes from the data.
    pub dims: Vec<usize>,
    pub decoder_hidden: usize,
    pub features: FeatureMode,
    /// Degree one-hot width for featureless graph collections.
    pub degree_cap: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            layer: None,
            dims: vec![512, 512],
            decoder_hidden: DEFAULT_DECODER_HIDDEN,
            features: FeatureMode::Dataset,
            degree_cap: DEFAULT_DEGREE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lambda_nei: f64,
    pub lambda_deg: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::new(EncoderConfig {
            layer_kind: LayerKind::Gcn,
            dims: vec![1, 1],
        });
        TrainSection {
            lambda_nei: t.lambda_nei,
            lambda_deg: t.lambda_deg,
            learning_rate: t.learning_rate,
            max_epochs: t.max_epochs,
            patience: t.patience,
            tolerance: t.tolerance,
            seed: t.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Number of seeds, starting at `train.seed`.
    pub seeds: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { seeds: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub data: DataSource,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub head: HeadConfig,
    /// Split ratios; task defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Ratios>,
    #[serde(default)]
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses `path` and resolves relative data paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.data.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn layer_kind(&self) -> LayerKind {
        self.model.layer.unwrap_or(match self.task {
            Task::Graph => LayerKind::Gin,
            Task::Node | Task::Link => LayerKind::Gcn,
        })
    }

    pub fn ratios(&self) -> Ratios {
        self.split.unwrap_or(match self.task {
            Task::Node => Ratios::NODE_FALLBACK,
            Task::Link => Ratios::LINK,
            Task::Graph => Ratios::GRAPH,
        })
    }

    pub fn train_config(&self, input_dim: usize) -> Result<TrainConfig> {
        let mut dims = vec![input_dim];
        dims.extend(&self.model.dims);
        let t = &self.train;
        let cfg = TrainConfig {
            encoder: EncoderConfig::new(self.layer_kind(), dims)?,
            decoder_hidden: self.model.decoder_hidden,
            lambda_nei: t.lambda_nei,
            lambda_deg: t.lambda_deg,
            learning_rate: t.learning_rate,
            max_epochs: t.max_epochs,
            patience: t.patience,
            tolerance: t.tolerance,
            seed: t.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.eval.seeds as u64).map(|k| self.train.seed + k).collect()
    }

    /// Checks every setting and that the dataset files exist, without
    /// reading them.
    pub fn validate(&self) -> Result<()> {
        self.train_config(1)?;
        self.head.validate()?;
        self.ratios().validate()?;
        if self.eval.seeds == 0 {
            return Err(Error::Config("eval.seeds must be positive".into()));
        }
        if self.model.degree_cap == 0 {
            return Err(Error::Config("model.degree_cap must be positive".into()));
        }
        match (self.task, &self.data) {
            (Task::Graph, DataSource::Tu { .. }) | (Task::Node | Task::Link, DataSource::Edgelist { .. }) => {}
            (task, _) => {
                return Err(Error::Config(format!(
                    "task {task:?} does not apply to {} data",
                    match self.data {
                        DataSource::Edgelist { .. } => "edgelist",
                        DataSource::Tu { .. } => "tu",
                    }
                )))
            }
        }
        if self.task == Task::Graph && self.model.features == FeatureMode::Identity {
            return Err(Error::Config("identity features apply to single-graph tasks only".into()));
        }
        for f in self.data.required_files() {
            if !f.exists() {
                return Err(Error::Config(format!("dataset file {} does not exist", f.display())));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        self.data.load()
    }

    /// Task description for `ds`, with the encoder input width taken from
    /// its features.
    pub fn task_spec(&self, ds: &Dataset) -> Result<TaskSpec> {
        let width = match (ds, self.model.features) {
            (Dataset::Citation(c), FeatureMode::Identity) => c.graph.node_count(),
            (Dataset::Citation(c), FeatureMode::Dataset) => c.features.cols(),
            (Dataset::Tu(t), _) => match &t.node_features {
                Some(f) => f.first().map_or(1, |x| x.cols()),
                None => self.model.degree_cap,
            },
        };
        Ok(TaskSpec {
            task: self.task,
            train: self.train_config(width)?,
            head: self.head.clone(),
            ratios: Some(self.ratios()),
            features: self.model.features,
            degree_cap: self.model.degree_cap,
        })
    }
}
