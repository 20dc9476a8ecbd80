//! Batch losses and their gradients.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Mean squared error over every entry of the batch:
/// `L = mean((y - t)^2)`, averaged over `rows * cols`.
///
/// Returns the loss and its gradient with respect to `y`
/// (`2 (y - t) / (rows * cols)`), to be fed to the network as an
/// output-space gradient.
pub fn mse_loss(y: &Matrix, t: &Matrix) -> Result<(f64, Matrix)> {
    if !y.same_shape(t) {
        return Err(Error::dimension(
            "mse_loss",
            format!("{}x{} vs {}x{}", y.rows(), y.cols(), t.rows(), t.cols()),
        ));
    }
    let n = (y.rows() * y.cols()) as f64;
    let mut grad = Matrix::zeros(y.rows(), y.cols());
    let mut sum = 0.0;
    for ((g, &yv), &tv) in grad.data_mut().iter_mut().zip(y.data()).zip(t.data()) {
        let d = yv - tv;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sum / n, grad))
}

/// Categorical cross-entropy of softmax probabilities against integer
/// labels: `L = -mean(ln p[label])`.
///
/// Probabilities are clamped to `[1e-12, 1]` inside the log so that a
/// confidently wrong classifier yields a large finite loss instead of
/// infinity. The returned gradient is the fused softmax/cross-entropy form
/// `(p - onehot) / batch`, expressed with respect to the final layer's
/// *logits*; feed it to the network as a logits-space gradient.
pub fn cce_loss(probs: &Matrix, labels: &[u8]) -> Result<(f64, Matrix)> {
    if probs.rows() != labels.len() {
        return Err(Error::dimension(
            "cce_loss",
            format!("{} probability rows vs {} labels", probs.rows(), labels.len()),
        ));
    }
    let classes = probs.cols();
    let batch = probs.rows() as f64;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    let mut sum = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let label = label as usize;
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: classes,
            });
        }
        let row = probs.row(r);
        // Caller contract for well-formed inputs; non-finite rows are let
        // through so the resulting non-finite loss reaches the training
        // loop's divergence check.
        debug_assert!(
            {
                let sum = row.iter().sum::<f64>();
                !sum.is_finite() || (sum - 1.0).abs() < 1e-6
            },
            "cce_loss expects softmax rows"
        );
        sum -= row[label].clamp(1e-12, 1.0).ln();
        for (c, (g, &p)) in grad.row_mut(r).iter_mut().zip(row).enumerate() {
            let target = if c == label { 1.0 } else { 0.0 };
            *g = (p - target) / batch;
        }
    }
    Ok((sum / batch, grad))
}
