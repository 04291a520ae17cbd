//! Encoder and decoder wired into a single forward pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{self, DecoderNoise, LayerVars, LossBreakdown, LossVars, DEFAULT_DECODER_HIDDEN};
use crate::diff::{finite_diff_check_with, Gradients, GradCheckReport, ParameterStore, RngState, Tape, Tensor, Var};
use crate::encoder::{self, EncoderConfig, GraphInput};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Stream ids for [`RngState::fork`].
pub const INIT_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder_hidden: usize,
}

impl ModelConfig {
    pub fn new(encoder: EncoderConfig) -> Self {
        ModelConfig {
            encoder,
            decoder_hidden: DEFAULT_DECODER_HIDDEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.decoder_hidden == 0 {
            return Err(Error::Config("decoder hidden width must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.encoder.dims
    }

    /// Encoder and decoder parameters, deterministic in `seed`.
    pub fn init_params(&self, seed: u64) -> Result<ParameterStore> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(RngState::new(seed).fork(INIT_STREAM).seed);
        let mut store = self.encoder.init_params(&mut rng)?;
        decoder::init_decoder_params(&mut store, self.dims(), self.decoder_hidden, &mut rng)?;
        Ok(store)
    }

    pub fn sample_noise(&self, nodes: usize, rng: &mut RngState) -> DecoderNoise {
        DecoderNoise::sample(nodes, self.dims(), rng)
    }

    /// Errors unless `params` holds exactly this model's tensors with the
    /// expected shapes.
    pub fn check_params(&self, params: &ParameterStore) -> Result<()> {
        let expected = self.init_params(0)?;
        for (name, t) in expected.iter() {
            let found = params
                .get(name)
                .map_err(|_| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if found.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {}x{}, the configured model needs {}x{}",
                    found.rows(),
                    found.cols(),
                    t.rows(),
                    t.cols()
                )));
            }
        }
        if let Some(extra) = params.names().find(|n| !expected.contains(n)) {
            return Err(Error::Checkpoint(format!("unexpected parameter `{extra}`")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub stack: Vec<Var>,
    pub decoder: Vec<LayerVars>,
    pub loss: LossVars,
}

/// Records encode, decode and the weighted loss on `tape`. Every entry of
/// `params` is registered, so `tape.backward` reports a gradient for each.
pub fn forward(
    tape: &mut Tape,
    config: &ModelConfig,
    input: &GraphInput,
    params: &ParameterStore,
    noise: &DecoderNoise,
    lambda_nei: f64,
    lambda_deg: f64,
) -> Result<Forward> {
    let vars = params.register(tape);
    let stack = encoder::encode_on_tape(tape, input, &vars, &config.encoder)?;
    let dec = decoder::decode_on_tape(tape, &stack, &vars, noise)?;
    let loss = decoder::loss_on_tape(tape, input, &stack, &dec, lambda_nei, lambda_deg)?;
    Ok(Forward {
        stack,
        decoder: dec,
        loss,
    })
}

/// Loss values for fixed parameters and noise.
pub fn evaluate_loss(
    config: &ModelConfig,
    input: &GraphInput,
    params: &ParameterStore,
    noise: &DecoderNoise,
    lambda_nei: f64,
    lambda_deg: f64,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let f = forward(&mut tape, config, input, params, noise, lambda_nei, lambda_deg)?;
    Ok(LossBreakdown::from_tape(&tape, &f.loss, lambda_nei, lambda_deg))
}

/// Finite-difference check of the total loss gradient for every encoder and
/// decoder parameter, with `noise` frozen.
pub fn gradient_check(
    config: &ModelConfig,
    input: &GraphInput,
    params: &ParameterStore,
    noise: &DecoderNoise,
    lambdas: (f64, f64),
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    gradient_check_with(config, input, params, noise, lambdas, step, tolerance, |_| {})
}

/// [`gradient_check`] with a hook that may alter the analytic gradients
/// before comparison.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check_with(
    config: &ModelConfig,
    input: &GraphInput,
    params: &ParameterStore,
    noise: &DecoderNoise,
    lambdas: (f64, f64),
    step: f64,
    tolerance: f64,
    adjust: impl FnOnce(&mut Gradients),
) -> Result<GradCheckReport> {
    finite_diff_check_with(
        params,
        step,
        tolerance,
        |p, tape| Ok(forward(tape, config, input, p, noise, lambdas.0, lambdas.1)?.loss.total),
        adjust,
    )
}

/// Offset added to every initial parameter entry by [`gradcheck_instance`].
pub const GRADCHECK_JITTER: f64 = 0.1;

/// Small instance used by the `gradcheck` command: an Erdős–Rényi graph
/// with uniform features and narrow decoder FNNs.
///
/// Parameters are the seeded initialization plus uniform jitter in
/// `±GRADCHECK_JITTER`. With zero initial biases, any all-zero input row puts
/// every downstream pre-activation exactly on the relu kink, where central
/// differences return half the one-sided slope.
pub fn gradcheck_instance(
    nodes: usize,
    edge_prob: f64,
    config: &ModelConfig,
    seed: u64,
) -> Result<(GraphInput, ParameterStore, DecoderNoise)> {
    let mut rng = ChaCha8Rng::seed_from_u64(RngState::new(seed).fork(7).seed);
    let g = Graph::random(nodes, edge_prob, &mut rng);
    let x = Tensor::uniform(nodes, config.encoder.input_dim(), 1.0, &mut rng);
    let input = GraphInput::new(g, x)?.dense_only();
    let mut params = config.init_params(seed)?;
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        for v in params.get_mut(&name)?.data_mut() {
            *v += rand::Rng::random_range(&mut rng, -GRADCHECK_JITTER..=GRADCHECK_JITTER);
        }
    }
    let noise = config.sample_noise(nodes, &mut RngState::new(seed).fork(NOISE_STREAM));
    Ok((input, params, noise))
}
