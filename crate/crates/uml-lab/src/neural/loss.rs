//! MSE and cross-entropy losses with their gradients.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Mean squared error over all elements, with the gradient w.r.t. `pred`.
pub fn mse_loss(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid(format!(
            "mse shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.len() as f64;
    if count == 0.0 {
        return Err(Error::invalid("mse on empty matrices"));
    }
    let diff = pred - target;
    let loss = diff.norm_squared() / count;
    let grad = diff * (2.0 / count);
    Ok((loss, grad))
}

/// Softmax cross-entropy averaged over the batch, with the gradient w.r.t.
/// the logits: `(softmax - onehot) / batch`.
pub fn cross_entropy_loss(logits: &DMatrix<f64>, labels: &[usize]) -> Result<(f64, DMatrix<f64>)> {
    let (batch, classes) = logits.shape();
    if labels.len() != batch {
        return Err(Error::invalid("label count does not match batch size"));
    }
    if batch == 0 || classes < 2 {
        return Err(Error::invalid("cross-entropy needs a nonempty batch and >= 2 classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} outside class range 0..{classes}"
        )));
    }
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(batch, classes);
    for i in 0..batch {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for j in 0..classes {
            denom += (row[j] - max).exp();
        }
        let log_denom = denom.ln() + max;
        loss += log_denom - row[labels[i]];
        for j in 0..classes {
            let softmax = (row[j] - log_denom).exp();
            grad[(i, j)] = (softmax - if j == labels[i] { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    Ok((loss / batch as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn mse_trivial_values() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert_eq!(mse_loss(&a, &a).unwrap().0, 0.0);
        let b = DMatrix::from_row_slice(1, 2, &[2.0, 3.0]);
        // Differences (1, 1) over 2 elements, mean reduction.
        assert_relative_eq!(mse_loss(&b, &a).unwrap().0, 1.0);
    }

    #[test]
    fn mse_matches_elementwise_oracle() {
        let mut rng = substream(3, 0);
        let p = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (loss, grad) = mse_loss(&p, &t).unwrap();
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                let d = p[(i, j)] - t[(i, j)];
                acc += d * d;
                assert_relative_eq!(grad[(i, j)], 2.0 * d / 12.0, epsilon = 1e-15);
            }
        }
        assert_relative_eq!(loss, acc / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn cross_entropy_uniform_logits_is_log_k() {
        for k in [2usize, 5, 11] {
            let logits = DMatrix::zeros(3, k);
            let labels = vec![0usize; 3];
            let (loss, _) = cross_entropy_loss(&logits, &labels).unwrap();
            assert_relative_eq!(loss, (k as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn cross_entropy_dominant_logit_vanishes() {
        let mut logits = DMatrix::zeros(1, 4);
        logits[(0, 2)] = 50.0;
        let (loss, _) = cross_entropy_loss(&logits, &[2]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let mut rng = substream(4, 0);
        let logits = DMatrix::from_fn(5, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let labels = vec![0usize, 2, 1, 1, 0];
        let (_, grad) = cross_entropy_loss(&logits, &labels).unwrap();
        // Finite-difference oracle over the logits.
        let flat: Vec<f64> = (0..5)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| logits[(i, j)])
            .collect();
        let mut eval = |p: &[f64]| {
            let m = DMatrix::from_fn(5, 3, |i, j| p[i * 3 + j]);
            cross_entropy_loss(&m, &labels).unwrap().0
        };
        let analytic: Vec<f64> = (0..5)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| grad[(i, j)])
            .collect();
        let err = gradcheck::max_relative_error(&mut eval, &flat, &analytic, 15, 1e-6, 2);
        assert!(err <= 1e-6, "softmax gradient mismatch {err}");
        assert!(cross_entropy_loss(&logits, &[0, 1, 2, 3, 0]).is_err());
    }
}
