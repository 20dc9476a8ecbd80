//! A single dense layer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Activation, Matrix};

/// Fully connected layer with weights stored as `(out_dim, in_dim)`: row `o`
/// holds the input weights of output unit `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Glorot-uniform initialization: weights drawn from
    /// `U(-sqrt(6/(in+out)), +sqrt(6/(in+out)))`, biases zero.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        DenseLayer {
            weights: Matrix::from_vec(out_dim, in_dim, data).expect("sized by construction"),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn from_parts(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dimension(
                "layer",
                format!("{} bias values for {} output units", bias.len(), weights.rows()),
            ));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// `activation(x * W^T + b)` for a `(batch, in_dim)` input.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::dimension(
                "layer forward",
                format!("input has {} features, layer expects {}", x.cols(), self.in_dim()),
            ));
        }
        let mut z = x.matmul_nt(&self.weights)?;
        z.add_row_vector(&self.bias)?;
        for r in 0..z.rows() {
            self.activation.apply_row(z.row_mut(r));
        }
        Ok(z)
    }

    /// Converts a gradient with respect to this layer's *outputs* into one
    /// with respect to its *pre-activations*, using the stored outputs `y`.
    pub fn preactivation_grad(&self, y: &Matrix, d_out: &Matrix) -> Result<Matrix> {
        if !y.same_shape(d_out) {
            return Err(Error::dimension(
                "preactivation_grad",
                format!(
                    "{}x{} outputs vs {}x{} gradient",
                    y.rows(),
                    y.cols(),
                    d_out.rows(),
                    d_out.cols()
                ),
            ));
        }
        if self.activation == Activation::Softmax {
            // Row Jacobian: dz_j = y_j * (g_j - sum_k g_k y_k).
            let mut dz = Matrix::zeros(y.rows(), y.cols());
            for r in 0..y.rows() {
                let yr = y.row(r);
                let gr = d_out.row(r);
                let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for (d, (&yj, &gj)) in dz.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                    *d = yj * (gj - inner);
                }
            }
            return Ok(dz);
        }
        let mut dz = d_out.clone();
        for (d, &yv) in dz.data_mut().iter_mut().zip(y.data()) {
            *d *= self.activation.grad_from_output(yv);
        }
        Ok(dz)
    }
}
