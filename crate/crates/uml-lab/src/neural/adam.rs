//! Adam optimizer over lists of parameter matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::DenseNet;

/// Adam state: first/second moment accumulators shaped like the parameters,
/// a step counter, and the hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
}

impl AdamState {
    /// Defaults: beta = (0.9, 0.999), epsilon = 1e-8.
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
        }
    }

    pub fn for_net(net: &DenseNet, lr: f64) -> Self {
        let shapes: Vec<(usize, usize)> = net.params().iter().map(|p| p.shape()).collect();
        AdamState::new(lr, &shapes)
    }

    /// One Adam update over `params` given matching `grads`.
    pub fn step(&mut self, params: &mut [&mut DMatrix<f64>], grads: &[&DMatrix<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid("parameter/gradient group count mismatch"));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(Error::invalid("parameter shape does not match optimizer state"));
            }
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let grad = g[(i, j)];
                    m[(i, j)] = self.beta1 * m[(i, j)] + (1.0 - self.beta1) * grad;
                    v[(i, j)] = self.beta2 * v[(i, j)] + (1.0 - self.beta2) * grad * grad;
                    let m_hat = m[(i, j)] / bias1;
                    let v_hat = v[(i, j)] / bias2;
                    p[(i, j)] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }
        }
        Ok(())
    }

    /// Convenience: one update of a whole net from its gradients.
    pub fn step_net(&mut self, net: &mut DenseNet, grads: &super::Gradients) -> Result<()> {
        let mut params = net.params_mut();
        let grad_list = grads.as_list();
        self.step(&mut params, &grad_list)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = DMatrix::from_row_slice(1, 2, &[1.0, -2.0]);
        let g = DMatrix::zeros(1, 2);
        let mut state = AdamState::new(1e-3, &[(1, 2)]);
        for _ in 0..5 {
            state.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p[(0, 0)], 1.0);
        assert_eq!(p[(0, 1)], -2.0);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        // With bias correction, step 1 moves by lr * g / (|g| + eps).
        let mut p = DMatrix::from_row_slice(1, 1, &[0.5]);
        let g = DMatrix::from_row_slice(1, 1, &[0.04]);
        let mut state = AdamState::new(1e-3, &[(1, 1)]);
        state.step(&mut [&mut p], &[&g]).unwrap();
        let expected = 0.5 - 1e-3 * 0.04 / (0.04 + 1e-8);
        assert_relative_eq!(p[(0, 0)], expected, epsilon = 1e-12);
    }

    #[test]
    fn two_steps_match_hand_recurrence() {
        // Scalar oracle computed straight from the update equations.
        let (lr, b1, b2, eps): (f64, f64, f64, f64) = (1e-2, 0.9, 0.999, 1e-8);
        let grads = [0.3, -0.15];
        let mut p_oracle = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for (t, &g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            p_oracle -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        let mut p = DMatrix::from_row_slice(1, 1, &[1.0]);
        let mut state = AdamState::new(lr, &[(1, 1)]);
        for &g in &grads {
            let gm = DMatrix::from_row_slice(1, 1, &[g]);
            state.step(&mut [&mut p], &[&gm]).unwrap();
        }
        assert_relative_eq!(p[(0, 0)], p_oracle, epsilon = 1e-14);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = DMatrix::zeros(2, 2);
        let g = DMatrix::zeros(1, 2);
        let mut state = AdamState::new(1e-3, &[(2, 2)]);
        assert!(state.step(&mut [&mut p], &[&g]).is_err());
    }
}
