use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::accuracy;
use crate::diff::{adam_step, AdamConfig, AdamState, ParameterStore, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn;

const PREFIX: &str = "head";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_layers() -> usize {
    4
}
fn default_hidden() -> usize {
    256
}
fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    300
}
fn default_patience() -> usize {
    30
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            layers: default_layers(),
            hidden: default_hidden(),
            learning_rate: default_lr(),
            max_epochs: default_epochs(),
            patience: default_patience(),
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.max_epochs == 0 {
            return Err(Error::Config("head layers, hidden width and max_epochs must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!("head learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Index sets for supervised head training.
#[derive(Debug, Clone, Copy)]
pub struct Partition<'a> {
    pub train: &'a [usize],
    pub val: &'a [usize],
    pub test: &'a [usize],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub epochs: usize,
}

/// MLP classifier on frozen embeddings, trained with softmax cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    pub params: ParameterStore,
    pub layers: usize,
    pub classes: usize,
}

impl MlpHead {
    pub fn new(input: usize, classes: usize, config: &HeadConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(config.hidden, config.layers - 1));
        widths.push(classes.max(1));
        let mut params = ParameterStore::new();
        nn::init_mlp(&mut params, PREFIX, &widths, &mut ChaCha8Rng::seed_from_u64(seed))?;
        Ok(MlpHead {
            params,
            layers: config.layers,
            classes: classes.max(1),
        })
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape);
        let xv = tape.constant(x.clone());
        let out = nn::mlp(&mut tape, &vars, PREFIX, self.layers, xv)?;
        Ok(tape.value(out).clone())
    }

    /// Arg-max class per row; the lowest index wins ties.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    fn accuracy_on(&self, x: &Tensor, labels: &[usize], idx: &[usize]) -> Result<f64> {
        let pred = self.predict(&x.select_rows(idx))?;
        let truth: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        Ok(accuracy(&pred, &truth))
    }

    /// Full-batch Adam on the training rows. After each step the validation
    /// accuracy is measured; the parameters with the best validation accuracy
    /// are kept, and training stops after `patience` epochs without a strict
    /// improvement.
    pub fn fit(
        x: &Tensor,
        labels: &[usize],
        classes: usize,
        part: Partition<'_>,
        config: &HeadConfig,
        seed: u64,
    ) -> Result<(MlpHead, ClassifyReport)> {
        if labels.len() != x.rows() {
            return Err(Error::SizeMismatch {
                expected: x.rows(),
                actual: labels.len(),
            });
        }
        if part.train.is_empty() {
            return Err(Error::InvalidInput("empty training partition".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.max(1)) {
            return Err(Error::InvalidInput(format!("label {bad} outside 0..{classes}")));
        }
        let train_labels: Vec<usize> = part.train.iter().map(|&i| labels[i]).collect();
        for c in 0..classes {
            if !train_labels.contains(&c) {
                log::warn!("class {c} has no training examples");
            }
        }
        let mut head = MlpHead::new(x.cols(), classes, config, seed)?;
        let x_train = x.select_rows(part.train);
        let train_labels: Arc<[usize]> = train_labels.into();
        let mut opt = AdamState::new(AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        });
        let val_idx = if part.val.is_empty() { part.train } else { part.val };

        let mut best = (head.params.clone(), f64::NEG_INFINITY, 0);
        let mut stale = 0;
        let mut epochs = 0;
        for epoch in 1..=config.max_epochs {
            epochs = epoch;
            let mut tape = Tape::new();
            let vars = head.params.register(&mut tape);
            let xv = tape.constant(x_train.clone());
            let logits = nn::mlp(&mut tape, &vars, PREFIX, head.layers, xv)?;
            let loss = tape.softmax_cross_entropy(logits, &train_labels)?;
            if !tape.value(loss).item().is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: tape.value(loss).item(),
                });
            }
            let grads = tape.backward(loss)?;
            drop(tape);
            adam_step(&mut head.params, &grads, &mut opt)?;

            let val = head.accuracy_on(x, labels, val_idx)?;
            if val > best.1 {
                best = (head.params.clone(), val, epoch);
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
        head.params = best.0;
        let report = ClassifyReport {
            train_accuracy: head.accuracy_on(x, labels, part.train)?,
            val_accuracy: best.1,
            test_accuracy: head.accuracy_on(x, labels, part.test)?,
            best_epoch: best.2,
            epochs,
        };
        Ok((head, report))
    }
}
