//! Unsupervised training: encode, decode, loss, backward and one Adam step
//! per epoch, full batch, until the loss plateaus or the epoch cap is hit.

use serde::{Deserialize, Serialize};

use crate::decoder::{LossBreakdown, DEFAULT_DECODER_HIDDEN};
use crate::diff::{adam_step, AdamConfig, AdamState, ParameterStore, RngState, Tape, Tensor};
use crate::encoder::{encode_input, EmbeddingStack, EncoderConfig, GraphInput};
use crate::error::{Error, Result};
use crate::model::{forward, ModelConfig, NOISE_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    #[serde(default = "default_hidden")]
    pub decoder_hidden: usize,
    #[serde(default = "default_lambda_nei")]
    pub lambda_nei: f64,
    #[serde(default = "default_lambda_deg")]
    pub lambda_deg: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_hidden() -> usize {
    DEFAULT_DECODER_HIDDEN
}
fn default_lambda_nei() -> f64 {
    0.1
}
fn default_lambda_deg() -> f64 {
    1.0
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_max_epochs() -> usize {
    500
}
fn default_patience() -> usize {
    20
}
fn default_tolerance() -> f64 {
    1e-4
}

impl TrainConfig {
    pub fn new(encoder: EncoderConfig) -> Self {
        TrainConfig {
            encoder,
            decoder_hidden: default_hidden(),
            lambda_nei: default_lambda_nei(),
            lambda_deg: default_lambda_deg(),
            learning_rate: default_learning_rate(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            tolerance: default_tolerance(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lambda_nei >= 0.0 && self.lambda_nei.is_finite())
            || !(self.lambda_deg >= 0.0 && self.lambda_deg.is_finite())
        {
            return bad(format!(
                "loss weights must be finite and non-negative, got lambda_nei={} lambda_deg={}",
                self.lambda_nei, self.lambda_deg
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return bad(format!("tolerance must be non-negative, got {}", self.tolerance));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            encoder: self.encoder.clone(),
            decoder_hidden: self.decoder_hidden,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxEpochs,
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_self: f64,
    pub l_nei: f64,
    pub l_deg: f64,
    pub total: f64,
}

impl EpochRecord {
    pub fn new(epoch: usize, b: &LossBreakdown) -> Self {
        EpochRecord {
            epoch,
            l_self: b.l_self,
            l_nei: b.l_nei,
            l_deg: b.l_deg,
            total: b.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss at each epoch, evaluated before that epoch's update.
    pub history: Vec<LossBreakdown>,
    pub epochs: usize,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn totals(&self) -> Vec<f64> {
        self.history.iter().map(|b| b.total).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterStore,
    /// Noise-free encoder outputs, one stack per input graph.
    pub stacks: Vec<EmbeddingStack>,
    pub report: TrainReport,
    pub optimizer: AdamState,
    pub rng: RngState,
}

/// True once the best total loss has gone `patience` consecutive epochs
/// without a relative improvement larger than `tolerance`.
pub fn has_converged(history: &[f64], tolerance: f64, patience: usize) -> bool {
    let Some((&first, rest)) = history.split_first() else {
        return false;
    };
    let mut best = first;
    let mut stale = 0;
    for &v in rest {
        if best - v > tolerance * best.abs() {
            best = v;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    stale >= patience
}

/// Trains on one graph, or on a collection treated as a single block-diagonal
/// graph so that each epoch minimizes the sum of the per-graph losses.
pub fn train_unsupervised(
    inputs: &[GraphInput],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::InvalidInput("no graphs to train on".into()));
    }
    let model = config.model();
    for input in inputs {
        if input.feature_dim() != model.encoder.input_dim() {
            return Err(Error::Config(format!(
                "feature width {} does not match encoder input width {}",
                input.feature_dim(),
                model.encoder.input_dim()
            )));
        }
    }
    let (union, offsets) = if inputs.len() == 1 {
        (inputs[0].clone(), vec![0])
    } else {
        GraphInput::disjoint_union(inputs)?
    };

    let mut params = model.init_params(config.seed)?;
    let mut optimizer = AdamState::new(config.adam());
    let mut rng = RngState::new(config.seed).fork(NOISE_STREAM);
    let mut history = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let noise = model.sample_noise(union.node_count(), &mut rng);
        let mut tape = Tape::new();
        let f = forward(&mut tape, &model, &union, &params, &noise, config.lambda_nei, config.lambda_deg)?;
        let loss = LossBreakdown::from_tape(&tape, &f.loss, config.lambda_nei, config.lambda_deg);
        if !loss.total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: loss.total,
            });
        }
        let grads = tape.backward(f.loss.total)?;
        drop(tape);
        adam_step(&mut params, &grads, &mut optimizer)?;
        on_epoch(&EpochRecord::new(epoch, &loss));
        log::debug!("epoch {epoch} total {:.6}", loss.total);
        history.push(loss);
        let totals: Vec<f64> = history.iter().map(|b| b.total).collect();
        if has_converged(&totals, config.tolerance, config.patience) {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let full = encode_input(&union, &params, &model.encoder)?;
    let stacks = split_stack(&full, &offsets, union.node_count());
    let epochs = history.len();
    Ok(TrainOutcome {
        params,
        stacks,
        report: TrainReport {
            history,
            epochs,
            stop_reason,
        },
        optimizer,
        rng,
    })
}

fn split_stack(full: &EmbeddingStack, offsets: &[usize], total: usize) -> Vec<EmbeddingStack> {
    offsets
        .iter()
        .enumerate()
        .map(|(k, &start)| {
            let end = offsets.get(k + 1).copied().unwrap_or(total);
            EmbeddingStack {
                layers: full.layers.iter().map(|h: &Tensor| h.slice_rows(start, end)).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::decoder::DecoderNoise;
    use crate::encoder::LayerKind;
    use crate::graph::Graph;
    use crate::model::evaluate_loss;

    fn small(kind: LayerKind, seed: u64, n: usize) -> (GraphInput, TrainConfig) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Graph::random(n, 0.3, &mut rng);
        let x = Tensor::uniform(n, 4, 1.0, &mut rng);
        let mut cfg = TrainConfig::new(EncoderConfig::new(kind, vec![4, 8, 8]).unwrap());
        cfg.decoder_hidden = 16;
        cfg.seed = seed;
        cfg.learning_rate = 1e-2;
        (GraphInput::new(g, x).unwrap(), cfg)
    }

    #[test]
    fn convergence_rule() {
        assert!(!has_converged(&[5.0, 4.0, 3.0, 2.0, 1.0], 1e-4, 2));
        assert!(has_converged(&[2.0; 6], 1e-4, 5));
        assert!(!has_converged(&[2.0; 5], 1e-4, 5));
        let h = [10.0, 9.0, 9.0001, 9.0002, 9.0003];
        assert!(!has_converged(&h[..4], 1e-3, 3));
        assert!(has_converged(&h, 1e-3, 3));
        // small improvements below the tolerance do not reset the counter
        assert!(has_converged(&[10.0, 9.99999, 9.99998, 9.99997], 1e-4, 3));
        assert!(!has_converged(&[], 1e-4, 0));
    }

    #[test]
    fn epoch_cap() {
        let (input, mut cfg) = small(LayerKind::Gcn, 1, 8);
        cfg.max_epochs = 0;
        assert!(matches!(train_unsupervised(std::slice::from_ref(&input), &cfg, |_| {}), Err(Error::Config(_))));
        cfg.max_epochs = 1;
        let out = train_unsupervised(&[input], &cfg, |_| {}).unwrap();
        assert_eq!(out.report.epochs, 1);
        assert_eq!(out.report.history.len(), 1);
        assert_eq!(out.optimizer.step, 1);
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let (input, mut cfg) = small(LayerKind::Gin, 2, 10);
        cfg.max_epochs = 15;
        let a = train_unsupervised(std::slice::from_ref(&input), &cfg, |_| {}).unwrap();
        let b = train_unsupervised(&[input], &cfg, |_| {}).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.report, b.report);
        assert_eq!(a.stacks, b.stacks);
    }

    #[test]
    fn training_lowers_loss() {
        let mut improved = 0;
        for seed in 0..10 {
            let (input, mut cfg) = small(LayerKind::Gcn, 100 + seed, 12);
            cfg.max_epochs = 200;
            cfg.learning_rate = 1e-3;
            cfg.patience = usize::MAX;
            let out = train_unsupervised(&[input], &cfg, |_| {}).unwrap();
            let t = out.report.totals();
            if t[t.len() - 1] < t[0] {
                improved += 1;
            }
        }
        assert!(improved >= 9, "{improved}/10");
    }

    #[test]
    fn log_records_every_epoch() {
        let (input, mut cfg) = small(LayerKind::Gcn, 3, 6);
        cfg.max_epochs = 4;
        let mut seen = Vec::new();
        let out = train_unsupervised(&[input], &cfg, |r| seen.push(*r)).unwrap();
        assert_eq!(seen.len(), 4);
        assert_eq!(seen.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(seen[2].total, out.report.history[2].total);
    }

    #[test]
    fn vanishing_learning_rate_keeps_parameters() {
        let (input, mut cfg) = small(LayerKind::Gcn, 4, 8);
        cfg.max_epochs = 1;
        cfg.learning_rate = 1e-300;
        let out = train_unsupervised(&[input], &cfg, |_| {}).unwrap();
        let init = cfg.model().init_params(cfg.seed).unwrap();
        for (name, t) in init.iter() {
            assert!(t.max_abs_diff(out.params.get(name).unwrap()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn graph_list_loss_is_sum_of_parts() {
        let (a, cfg) = small(LayerKind::Gin, 5, 6);
        let (b, _) = small(LayerKind::Gin, 6, 5);
        let model = cfg.model();
        let params = model.init_params(0).unwrap();
        let mut rng = RngState::new(3);
        let na = model.sample_noise(6, &mut rng);
        let nb = model.sample_noise(5, &mut rng);
        let la = evaluate_loss(&model, &a, &params, &na, 0.1, 1.0).unwrap();
        let lb = evaluate_loss(&model, &b, &params, &nb, 0.1, 1.0).unwrap();
        let (union, offsets) = GraphInput::disjoint_union(&[a, b]).unwrap();
        assert_eq!(offsets, vec![0, 6]);
        let joint = DecoderNoise {
            eps: na.eps.iter().zip(&nb.eps).map(|(x, y)| Tensor::vstack(&[x.clone(), y.clone()]).unwrap()).collect(),
        };
        let lu = evaluate_loss(&model, &union, &params, &joint, 0.1, 1.0).unwrap();
        assert!((lu.total - (la.total + lb.total)).abs() < 1e-9);
    }

    #[test]
    fn graph_list_returns_one_stack_per_graph() {
        let (a, mut cfg) = small(LayerKind::Gin, 7, 6);
        let (b, _) = small(LayerKind::Gin, 8, 4);
        cfg.max_epochs = 2;
        let out = train_unsupervised(&[a.clone(), b.clone()], &cfg, |_| {}).unwrap();
        assert_eq!(out.stacks.len(), 2);
        assert_eq!(out.stacks[1].last().rows(), 4);
        let direct = encode_input(&b, &out.params, &cfg.encoder).unwrap();
        assert!(direct.last().max_abs_diff(out.stacks[1].last()).unwrap() < 1e-12);
    }

    #[test]
    fn divergence_reports_epoch() {
        let (mut input, mut cfg) = small(LayerKind::Gcn, 9, 6);
        input.features.data_mut()[0] = f64::NAN;
        cfg.max_epochs = 3;
        assert!(matches!(
            train_unsupervised(&[input], &cfg, |_| {}),
            Err(Error::Diverged { epoch: 1, .. })
        ));
    }

    /// All-zero features with zero decoder weights: the neighborhood term
    /// vanishes and no gradient reaches the encoder. The self term does not
    /// vanish, since `z = eps` with unit variance.
    #[test]
    fn zero_feature_fixed_point() {
        let g = Graph::path(5);
        let input = GraphInput::new(g, Tensor::zeros(5, 4)).unwrap();
        let model = ModelConfig {
            encoder: EncoderConfig::new(LayerKind::Gcn, vec![4, 3, 3]).unwrap(),
            decoder_hidden: 6,
        };
        let mut params = model.init_params(1).unwrap();
        let names: Vec<String> = params.names().filter(|n| n.starts_with("dec.")).cloned().collect();
        for n in names {
            let t = params.get_mut(&n).unwrap();
            *t = Tensor::zeros(t.rows(), t.cols());
        }
        let noise = model.sample_noise(5, &mut RngState::new(0));
        let mut tape = Tape::new();
        let f = forward(&mut tape, &model, &input, &params, &noise, 0.1, 0.0).unwrap();
        let loss = LossBreakdown::from_tape(&tape, &f.loss, 0.1, 0.0);
        assert_eq!(loss.l_nei, 0.0);
        let eps_sq: f64 = noise.eps.iter().map(|e| e.data().iter().map(|v| v * v).sum::<f64>()).sum();
        assert!((loss.l_self - eps_sq).abs() < 1e-12);
        let grads = tape.backward(f.loss.total).unwrap();
        for (name, g) in grads.iter().filter(|(n, _)| n.starts_with("enc.")) {
            assert!(g.data().iter().all(|&v| v == 0.0), "{name}");
        }
    }
}
