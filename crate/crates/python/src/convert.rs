//! Plain-Rust conversions behind the bindings, kept free of Python types.

use isoc_vgae::diff::Tensor;
use isoc_vgae::encoder::{EncoderConfig, LayerKind};
use isoc_vgae::error::{Error, Result};
use isoc_vgae::training::TrainConfig;

/// Row-major matrix from nested rows; every row must have the same width.
pub fn tensor_from_rows(rows: &[Vec<f64>]) -> Result<Tensor> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::SizeMismatch {
            expected: cols,
            actual: bad.len(),
        });
    }
    Tensor::from_vec(rows.len(), cols, rows.concat())
}

pub fn tensor_to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

pub fn layer_kind(name: &str) -> Result<LayerKind> {
    name.parse()
}

/// Training configuration from keyword-style values. `dims` are the encoder
/// output widths; the input width is taken from the features at train time.
#[allow(clippy::too_many_arguments)]
pub fn train_config(
    layer: &str,
    dims: &[usize],
    decoder_hidden: usize,
    lambda_nei: f64,
    lambda_deg: f64,
    learning_rate: f64,
    max_epochs: usize,
    patience: usize,
    tolerance: f64,
    seed: u64,
) -> Result<TrainConfig> {
    let mut widths = vec![1];
    widths.extend_from_slice(dims);
    let mut c = TrainConfig::new(EncoderConfig::new(layer_kind(layer)?, widths)?);
    c.decoder_hidden = decoder_hidden;
    c.lambda_nei = lambda_nei;
    c.lambda_deg = lambda_deg;
    c.learning_rate = learning_rate;
    c.max_epochs = max_epochs;
    c.patience = patience;
    c.tolerance = tolerance;
    c.seed = seed;
    c.validate()?;
    Ok(c)
}
