//! Inverse-GNN decoder.
//!
//! Walking the embedding stack from the top, layer `l` reads `H^(l+1)` and
//! produces
//!
//! ```text
//! mu      = FNN_mu(H^(l+1))
//! sigma   = exp(clamp(FNN_sigma(H^(l+1)), -10, 10))
//! d_hat   = relu(FNN_d(H^(l+1)))
//! z       = mu_tilde + mu + sigma * eps,      eps ~ N(0, I)
//! ```
//!
//! with `mu_tilde^(L-1) = 0` and `mu_tilde^(l-1) = FNN_z^(l)(z^(l))`.
//!
//! Losses, summed over layers `l = 0..L-1` and nodes `i`:
//!
//! ```text
//! L_self = |h_i - z_i|^2
//! L_nei  = KL(N(mu_tilde_i + mu_i, diag sigma_i^2) || N(m_i, I)),  m_i = mean of h over the closed neighborhood
//! L_deg  = (d_i - d_hat_i)^2
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{sample_standard_normal, ParamVars, ParameterStore, RngState, Tape, Tensor, Var};
use crate::encoder::{EmbeddingStack, GraphInput};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn;

pub const LOG_SIGMA_MIN: f64 = -10.0;
pub const LOG_SIGMA_MAX: f64 = 10.0;
pub const DEFAULT_DECODER_HIDDEN: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Mu,
    Sigma,
    Degree,
    Prior,
}

impl Head {
    fn tag(self) -> &'static str {
        match self {
            Head::Mu => "mu",
            Head::Sigma => "sigma",
            Head::Degree => "deg",
            Head::Prior => "z",
        }
    }
}

/// Parameter-name prefix of one decoder FNN.
pub fn head_prefix(layer: usize, head: Head) -> String {
    format!("dec.{layer}.{}", head.tag())
}

/// Adds `FNN_mu`, `FNN_sigma`, `FNN_d` for every layer and `FNN_z` for
/// layers `1..L` to `store`. `dims` are the encoder widths `C_0..C_L`.
pub fn init_decoder_params<R: Rng + ?Sized>(
    store: &mut ParameterStore,
    dims: &[usize],
    hidden: usize,
    rng: &mut R,
) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config("decoder needs at least one encoder layer".into()));
    }
    for l in (0..dims.len() - 1).rev() {
        let (below, above) = (dims[l], dims[l + 1]);
        nn::init_mlp(store, &head_prefix(l, Head::Mu), &[above, hidden, below], rng)?;
        nn::init_mlp(store, &head_prefix(l, Head::Sigma), &[above, hidden, below], rng)?;
        nn::init_mlp(store, &head_prefix(l, Head::Degree), &[above, hidden, 1], rng)?;
        if l > 0 {
            nn::init_mlp(store, &head_prefix(l, Head::Prior), &[below, hidden, dims[l - 1]], rng)?;
        }
    }
    Ok(())
}

/// Standard normal draws `eps^(l)`, indexed by layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderNoise {
    pub eps: Vec<Tensor>,
}

impl DecoderNoise {
    /// Draws `N x C_l` blocks in decoding order, `l = L-1` first.
    pub fn sample(n: usize, dims: &[usize], rng: &mut RngState) -> Self {
        let layers = dims.len() - 1;
        let mut eps = vec![Tensor::zeros(0, 0); layers];
        for l in (0..layers).rev() {
            eps[l] = sample_standard_normal(n, dims[l], rng);
        }
        DecoderNoise { eps }
    }

    pub fn zeros(n: usize, dims: &[usize]) -> Self {
        DecoderNoise {
            eps: dims[..dims.len() - 1].iter().map(|&c| Tensor::zeros(n, c)).collect(),
        }
    }

    pub fn permute_rows(&self, mapping: &[usize]) -> Result<Self> {
        let eps = self.eps.iter().map(|e| e.permute_rows(mapping)).collect::<Result<_>>()?;
        Ok(DecoderNoise { eps })
    }
}

/// Tape handles for one decoder layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub mu: Var,
    pub log_sigma: Var,
    pub sigma: Var,
    pub d_hat: Var,
    /// `None` at the top layer, where the prior mean is zero.
    pub mu_tilde: Option<Var>,
    pub z: Var,
}

/// Records the decoder on `tape`; the result is indexed by layer.
pub fn decode_on_tape(tape: &mut Tape, stack: &[Var], vars: &ParamVars, noise: &DecoderNoise) -> Result<Vec<LayerVars>> {
    let layers = stack.len() - 1;
    if noise.eps.len() != layers {
        return Err(Error::SizeMismatch {
            expected: layers,
            actual: noise.eps.len(),
        });
    }
    let mut out: Vec<Option<LayerVars>> = vec![None; layers];
    let mut mu_tilde = None;
    for l in (0..layers).rev() {
        let above = stack[l + 1];
        let mu = nn::mlp(tape, vars, &head_prefix(l, Head::Mu), 2, above)?;
        let raw = nn::mlp(tape, vars, &head_prefix(l, Head::Sigma), 2, above)?;
        let log_sigma = tape.clamp(raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX);
        let sigma = tape.exp(log_sigma);
        let deg = nn::mlp(tape, vars, &head_prefix(l, Head::Degree), 2, above)?;
        let d_hat = tape.relu(deg);

        let eps = tape.constant(noise.eps[l].clone());
        let spread = tape.mul(sigma, eps)?;
        let mean = match mu_tilde {
            Some(t) => tape.add(t, mu)?,
            None => mu,
        };
        let z = tape.add(mean, spread)?;
        out[l] = Some(LayerVars {
            mu,
            log_sigma,
            sigma,
            d_hat,
            mu_tilde,
            z,
        });
        mu_tilde = if l > 0 {
            Some(nn::mlp(tape, vars, &head_prefix(l, Head::Prior), 2, z)?)
        } else {
            None
        };
    }
    Ok(out.into_iter().map(|v| v.expect("every layer decoded")).collect())
}

/// Tape handles of the loss terms.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub l_self: Var,
    pub l_nei: Var,
    pub l_deg: Var,
    pub total: Var,
}

/// Records the three losses and their weighted total.
pub fn loss_on_tape(
    tape: &mut Tape,
    input: &GraphInput,
    stack: &[Var],
    dec: &[LayerVars],
    lambda_nei: f64,
    lambda_deg: f64,
) -> Result<LossVars> {
    let n = input.node_count();
    let degrees = Tensor::column(&input.graph.degrees().iter().map(|&d| d as f64).collect::<Vec<_>>());
    let degrees = tape.constant(degrees);
    let mut terms: Option<(Var, Var, Var)> = None;
    for (l, lv) in dec.iter().enumerate() {
        let h = stack[l];
        let s = tape.squared_frobenius(h, lv.z)?;

        let m = tape.sparse_matmul(&input.ops.mean, h)?;
        let q_mean = match lv.mu_tilde {
            Some(t) => tape.add(t, lv.mu)?,
            None => lv.mu,
        };
        let mean_gap = tape.squared_frobenius(q_mean, m)?;
        let var = tape.mul(lv.sigma, lv.sigma)?;
        let var_sum = tape.sum(var);
        let log_sum = tape.sum(lv.log_sigma);
        let log_twice = tape.scale(log_sum, 2.0);
        let kl = tape.add(mean_gap, var_sum)?;
        let kl = tape.sub(kl, log_twice)?;
        let kl = tape.add_scalar(kl, -((n * tape.value(h).cols()) as f64));
        let kl = tape.scale(kl, 0.5);

        let d = tape.squared_frobenius(degrees, lv.d_hat)?;
        terms = Some(match terms {
            None => (s, kl, d),
            Some((a, b, c)) => (tape.add(a, s)?, tape.add(b, kl)?, tape.add(c, d)?),
        });
    }
    let (l_self, l_nei, l_deg) = terms.ok_or_else(|| Error::InvalidInput("no decoder layers".into()))?;
    let nei = tape.scale(l_nei, lambda_nei);
    let deg = tape.scale(l_deg, lambda_deg);
    let total = tape.add(l_self, nei)?;
    let total = tape.add(total, deg)?;
    Ok(LossVars {
        l_self,
        l_nei,
        l_deg,
        total,
    })
}

/// Values of one decoder layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderLayer {
    pub mu: Tensor,
    pub sigma: Tensor,
    pub z: Tensor,
    pub mu_tilde: Tensor,
    pub d_hat: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderOutputs {
    /// Indexed by layer `l = 0..L-1`.
    pub layers: Vec<DecoderLayer>,
}

impl DecoderOutputs {
    pub fn from_tape(tape: &Tape, dec: &[LayerVars]) -> Self {
        let layers = dec
            .iter()
            .map(|lv| {
                let mu = tape.value(lv.mu).clone();
                let mu_tilde = match lv.mu_tilde {
                    Some(t) => tape.value(t).clone(),
                    None => Tensor::zeros(mu.rows(), mu.cols()),
                };
                DecoderLayer {
                    sigma: tape.value(lv.sigma).clone(),
                    z: tape.value(lv.z).clone(),
                    d_hat: tape.value(lv.d_hat).clone(),
                    mu,
                    mu_tilde,
                }
            })
            .collect();
        DecoderOutputs { layers }
    }
}

fn stack_on_tape(tape: &mut Tape, stack: &EmbeddingStack) -> Vec<Var> {
    stack.layers.iter().map(|h| tape.constant(h.clone())).collect()
}

/// Decodes with explicit noise.
pub fn decode_with_noise(stack: &EmbeddingStack, params: &ParameterStore, noise: &DecoderNoise) -> Result<DecoderOutputs> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let hv = stack_on_tape(&mut tape, stack);
    let dec = decode_on_tape(&mut tape, &hv, &vars, noise)?;
    Ok(DecoderOutputs::from_tape(&tape, &dec))
}

/// Decodes with noise drawn from `rng`, which is advanced.
pub fn decode(stack: &EmbeddingStack, params: &ParameterStore, rng: &mut RngState) -> Result<DecoderOutputs> {
    let dims: Vec<usize> = stack.layers.iter().map(Tensor::cols).collect();
    let noise = DecoderNoise::sample(stack.layer(0).rows(), &dims, rng);
    decode_with_noise(stack, params, &noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_self: f64,
    pub l_nei: f64,
    pub l_deg: f64,
    pub total: f64,
    pub lambda_nei: f64,
    pub lambda_deg: f64,
}

impl LossBreakdown {
    pub fn new(l_self: f64, l_nei: f64, l_deg: f64, lambda_nei: f64, lambda_deg: f64) -> Self {
        LossBreakdown {
            l_self,
            l_nei,
            l_deg,
            total: l_self + lambda_nei * l_nei + lambda_deg * l_deg,
            lambda_nei,
            lambda_deg,
        }
    }

    pub fn from_tape(tape: &Tape, v: &LossVars, lambda_nei: f64, lambda_deg: f64) -> Self {
        LossBreakdown {
            l_self: tape.value(v.l_self).item(),
            l_nei: tape.value(v.l_nei).item(),
            l_deg: tape.value(v.l_deg).item(),
            total: tape.value(v.total).item(),
            lambda_nei,
            lambda_deg,
        }
    }
}

fn check_layers(stack: &EmbeddingStack, outputs: &DecoderOutputs) -> Result<()> {
    if outputs.layers.len() != stack.num_layers() {
        return Err(Error::SizeMismatch {
            expected: stack.num_layers(),
            actual: outputs.layers.len(),
        });
    }
    Ok(())
}

pub fn loss_self(stack: &EmbeddingStack, outputs: &DecoderOutputs) -> Result<f64> {
    check_layers(stack, outputs)?;
    let mut total = 0.0;
    for (l, layer) in outputs.layers.iter().enumerate() {
        total += stack.layer(l).squared_frobenius(&layer.z)?;
    }
    Ok(total)
}

/// Row `i` is the mean of `h` over node `i` and its neighbors.
pub fn neighborhood_posterior_mean(h: &Tensor, g: &Graph) -> Result<Tensor> {
    if h.rows() != g.node_count() {
        return Err(Error::SizeMismatch {
            expected: g.node_count(),
            actual: h.rows(),
        });
    }
    let mut out = Tensor::zeros(h.rows(), h.cols());
    for i in 0..g.node_count() {
        let count = (g.degree(i) + 1) as f64;
        let row = out.row_mut(i);
        row.copy_from_slice(h.row(i));
        for &j in g.neighbors(i) {
            for (o, v) in row.iter_mut().zip(h.row(j)) {
                *o += v;
            }
        }
        for o in row.iter_mut() {
            *o /= count;
        }
    }
    Ok(out)
}

/// KL divergence between diagonal Gaussians, one value per row:
/// `0.5 * sum_d [(mu_q - mu_p)^2 / s_p^2 + s_q^2 / s_p^2 + 2 (ln s_p - ln s_q) - 1]`.
pub fn kl_diag_gaussian(mu_q: &Tensor, sigma_q: &Tensor, mu_p: &Tensor, sigma_p: &Tensor) -> Result<Vec<f64>> {
    mu_q.check_same(sigma_q, "kl_diag_gaussian")?;
    mu_q.check_same(mu_p, "kl_diag_gaussian")?;
    mu_q.check_same(sigma_p, "kl_diag_gaussian")?;
    if let Some(&s) = sigma_q.data().iter().chain(sigma_p.data()).find(|&&s| s.is_nan() || s <= 0.0) {
        return Err(Error::NonPositiveSigma(s));
    }
    let mut out = Vec::with_capacity(mu_q.rows());
    for i in 0..mu_q.rows() {
        let mut kl = 0.0;
        for d in 0..mu_q.cols() {
            let (mq, sq, mp, sp) = (mu_q.get(i, d), sigma_q.get(i, d), mu_p.get(i, d), sigma_p.get(i, d));
            let vp = sp * sp;
            kl += (mq - mp) * (mq - mp) / vp + sq * sq / vp + 2.0 * (sp.ln() - sq.ln()) - 1.0;
        }
        out.push(0.5 * kl);
    }
    Ok(out)
}

pub fn loss_nei(outputs: &DecoderOutputs, stack: &EmbeddingStack, g: &Graph) -> Result<f64> {
    check_layers(stack, outputs)?;
    let mut total = 0.0;
    for (l, layer) in outputs.layers.iter().enumerate() {
        let target = neighborhood_posterior_mean(stack.layer(l), g)?;
        let q_mean = layer.mu_tilde.add(&layer.mu)?;
        let unit = Tensor::ones(target.rows(), target.cols());
        total += kl_diag_gaussian(&q_mean, &layer.sigma, &target, &unit)?.iter().sum::<f64>();
    }
    Ok(total)
}

pub fn loss_deg(g: &Graph, outputs: &DecoderOutputs) -> Result<f64> {
    let mut total = 0.0;
    for layer in &outputs.layers {
        if layer.d_hat.shape() != (g.node_count(), 1) {
            return Err(Error::Shape {
                op: "loss_deg",
                lhs: (g.node_count(), 1),
                rhs: layer.d_hat.shape(),
            });
        }
        for (i, &d) in g.degrees().iter().enumerate() {
            let r = d as f64 - layer.d_hat.get(i, 0);
            total += r * r;
        }
    }
    Ok(total)
}

pub fn total_loss(
    stack: &EmbeddingStack,
    outputs: &DecoderOutputs,
    g: &Graph,
    lambda_nei: f64,
    lambda_deg: f64,
) -> Result<LossBreakdown> {
    if !lambda_nei.is_finite() || !lambda_deg.is_finite() {
        return Err(Error::Config(format!(
            "loss weights must be finite, got {lambda_nei} and {lambda_deg}"
        )));
    }
    Ok(LossBreakdown::new(
        loss_self(stack, outputs)?,
        loss_nei(outputs, stack, g)?,
        loss_deg(g, outputs)?,
        lambda_nei,
        lambda_deg,
    ))
}
