//! Feedforward network with explicit backpropagation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Activation, DenseLayer, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Cached activations from one forward pass: the input batch plus every
/// layer's post-activation output, as needed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Matrix,
    pub outputs: Vec<Matrix>,
}

impl ForwardTrace {
    /// The final layer's output.
    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("networks have at least one layer")
    }
}

/// Gradient of a scalar loss with respect to the network output, in one of
/// two reference frames.
///
/// `Output` is the ordinary gradient with respect to post-activation outputs.
/// `Logits` is a gradient already expressed with respect to the final layer's
/// *pre-activations*; it is how the fused softmax/cross-entropy gradient
/// enters the network and is only valid when the final activation is softmax.
#[derive(Debug, Clone)]
pub enum OutputGradient {
    Output(Matrix),
    Logits(Matrix),
}

/// Per-layer parameter gradient.
#[derive(Debug, Clone)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients of a scalar loss with respect to every parameter and to the
/// network input; shapes mirror the network exactly.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub layers: Vec<LayerGradient>,
    pub input: Matrix,
}

impl GradientBundle {
    /// All-zero gradients shaped like `net` for a batch of `batch` rows.
    pub fn zeros_like(net: &Network, batch: usize) -> Self {
        GradientBundle {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
            input: Matrix::zeros(batch, net.in_dim()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.input.all_finite()
            && self.layers.iter().all(|l| {
                l.weights.all_finite() && l.bias.iter().all(|b| b.is_finite())
            })
    }
}

impl Network {
    /// Builds a network from layers, checking that adjacent dimensions chain.
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::dimension("network", "no layers given"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dimension(
                    "network",
                    format!(
                        "layer {} outputs {} features but layer {} expects {}",
                        i,
                        pair[0].out_dim(),
                        i + 1,
                        pair[1].in_dim()
                    ),
                ));
            }
        }
        Ok(Network { layers })
    }

    /// Builds a Glorot-initialized network from a dimension chain: `dims`
    /// lists every layer width including input, and `activations[i]` is the
    /// activation after layer `i` (`activations.len() == dims.len() - 1`).
    pub fn glorot(dims: &[usize], activations: &[Activation], rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::dimension(
                "network",
                format!(
                    "{} widths need {} activations, got {}",
                    dims.len(),
                    dims.len().saturating_sub(1),
                    activations.len()
                ),
            ));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect();
        Network::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn final_activation(&self) -> Activation {
        self.layers.last().expect("non-empty").activation
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * l.in_dim() + l.out_dim())
            .sum()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Forward pass that keeps every layer output for a later backward pass.
    pub fn forward_trace(&self, x: &Matrix) -> Result<ForwardTrace> {
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = self.layers[0].forward(x)?;
        outputs.push(cur.clone());
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur)?;
            outputs.push(cur.clone());
        }
        Ok(ForwardTrace {
            input: x.clone(),
            outputs,
        })
    }

    /// Full backward pass: parameter gradients for every layer plus the
    /// gradient with respect to the input batch.
    pub fn backward(&self, trace: &ForwardTrace, grad: OutputGradient) -> Result<GradientBundle> {
        let (layers, input) = self.backward_impl(trace, grad, true)?;
        Ok(GradientBundle {
            layers: layers.expect("requested parameter gradients"),
            input,
        })
    }

    /// Backward pass that propagates only the input gradient, skipping the
    /// weight/bias gradients. Used when the network is frozen (a fixed
    /// classifier inside the training loss, or any network under attack):
    /// for wide layers the skipped `dZ^T X` products are the dominant cost.
    pub fn input_gradient(&self, trace: &ForwardTrace, grad: OutputGradient) -> Result<Matrix> {
        let (_, input) = self.backward_impl(trace, grad, false)?;
        Ok(input)
    }

    fn backward_impl(
        &self,
        trace: &ForwardTrace,
        grad: OutputGradient,
        with_params: bool,
    ) -> Result<(Option<Vec<LayerGradient>>, Matrix)> {
        if trace.outputs.len() != self.layers.len() {
            return Err(Error::dimension(
                "backward",
                format!(
                    "trace has {} layer outputs, network has {} layers",
                    trace.outputs.len(),
                    self.layers.len()
                ),
            ));
        }
        let last = self.layers.len() - 1;
        // Gradient with respect to the last layer's pre-activations.
        let mut dz = match grad {
            OutputGradient::Output(g) => {
                if !g.same_shape(&trace.outputs[last]) {
                    return Err(Error::dimension(
                        "backward",
                        format!(
                            "loss gradient is {}x{}, output is {}x{}",
                            g.rows(),
                            g.cols(),
                            trace.outputs[last].rows(),
                            trace.outputs[last].cols()
                        ),
                    ));
                }
                self.layers[last].preactivation_grad(&trace.outputs[last], &g)?
            }
            OutputGradient::Logits(g) => {
                if self.layers[last].activation != Activation::Softmax {
                    return Err(Error::dimension(
                        "backward",
                        "logits-space gradient requires a softmax final layer",
                    ));
                }
                if !g.same_shape(&trace.outputs[last]) {
                    return Err(Error::dimension(
                        "backward",
                        format!(
                            "logits gradient is {}x{}, output is {}x{}",
                            g.rows(),
                            g.cols(),
                            trace.outputs[last].rows(),
                            trace.outputs[last].cols()
                        ),
                    ));
                }
                g
            }
        };

        let mut param_grads = if with_params {
            Some(Vec::with_capacity(self.layers.len()))
        } else {
            None
        };
        for k in (0..self.layers.len()).rev() {
            let layer_input = if k == 0 { &trace.input } else { &trace.outputs[k - 1] };
            if let Some(grads) = param_grads.as_mut() {
                grads.push(LayerGradient {
                    weights: dz.matmul_tn(layer_input)?,
                    bias: dz.column_sums(),
                });
            }
            // Gradient with respect to this layer's input ...
            let d_input = dz.matmul_nn(&self.layers[k].weights)?;
            if k == 0 {
                if let Some(grads) = param_grads.as_mut() {
                    grads.reverse();
                }
                return Ok((param_grads, d_input));
            }
            // ... becomes the gradient w.r.t. the previous layer's outputs.
            dz = self.layers[k - 1].preactivation_grad(&trace.outputs[k - 1], &d_input)?;
        }
        unreachable!("loop returns at k == 0")
    }
}
