//! Layer activations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied to a layer's pre-activation outputs.
///
/// `Softmax` is row-wise and only meaningful as the final layer of a
/// classifier; everything else is elementwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Activation {
    /// Stable one-byte tag used by the binary weight format.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Tanh => 3,
            Activation::Softmax => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::Sigmoid,
            3 => Activation::Tanh,
            4 => Activation::Softmax,
            other => {
                return Err(Error::Config(format!("unknown activation tag {}", other)));
            }
        })
    }

    /// Applies the activation to one row of pre-activations, in place.
    pub fn apply_row(self, z: &mut [f64]) {
        match self {
            Activation::Linear => {}
            Activation::Relu => {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for v in z.iter_mut() {
                    *v = 1.0 / (1.0 + (-*v).exp());
                }
            }
            Activation::Tanh => {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            Activation::Softmax => {
                // Max-shifted for overflow safety; the result is unchanged
                // mathematically because softmax is shift-invariant.
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in z.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in z.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }

    /// Derivative of the activation expressed through its *output* value,
    /// valid for the elementwise activations.
    ///
    /// For ReLU the kink at zero is assigned derivative 0. `Softmax` has no
    /// elementwise derivative; its backward path goes through the full
    /// row Jacobian in the network engine.
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Softmax => {
                unreachable!("softmax gradient is handled by the row Jacobian path")
            }
        }
    }
}
