use crate::diff::Tensor;
use crate::error::{Error, Result};

/// Inner products `<z_i, z_j>` for each pair.
pub fn link_scores(z: &Tensor, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= z.rows() || j >= z.rows() {
                return Err(Error::InvalidInput(format!("pair ({i}, {j}) outside 0..{}", z.rows())));
            }
            Ok(z.row(i).iter().zip(z.row(j)).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Area under the ROC curve from ranks: the probability that a random
/// positive outscores a random negative, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::SizeMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("auc needs both positive and negative examples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average 1-based ranks over tie groups
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[k..=end].iter().filter(|&&i| labels[i]).count() as f64;
        k = end + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Column sums of `H^(L)`.
pub fn graph_embedding(h: &Tensor) -> Result<Vec<f64>> {
    if h.rows() == 0 {
        return Err(Error::InvalidInput("graph embedding of an empty graph".into()));
    }
    Ok(h.column_sums().into_vec())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / predicted.len() as f64
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
