//! Adam optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{GradientBundle, Matrix, Network};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second-moment accumulators for one network, plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Matrix>,
    v_weights: Vec<Matrix>,
    m_bias: Vec<Vec<f64>>,
    v_bias: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let m_weights = net
            .layers()
            .iter()
            .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
            .collect::<Vec<_>>();
        let m_bias = net
            .layers()
            .iter()
            .map(|l| vec![0.0; l.out_dim()])
            .collect::<Vec<_>>();
        AdamState {
            v_weights: m_weights.clone(),
            m_weights,
            v_bias: m_bias.clone(),
            m_bias,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

fn update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], c: &StepConstants) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        let m_hat = m[i] / c.bias1;
        let v_hat = v[i] / c.bias2;
        params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
    }
}

struct StepConstants {
    beta1: f64,
    beta2: f64,
    bias1: f64,
    bias2: f64,
    learning_rate: f64,
    epsilon: f64,
}

/// One Adam update of every parameter in `net` from the gradients in
/// `grads`, advancing the shared step counter once.
pub fn adam_step(
    net: &mut Network,
    grads: &GradientBundle,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.layers.len() != net.layers().len() || state.m_weights.len() != net.layers().len() {
        return Err(Error::dimension(
            "adam_step",
            format!(
                "network has {} layers, gradients {}, state {}",
                net.layers().len(),
                grads.layers.len(),
                state.m_weights.len()
            ),
        ));
    }
    for (layer, lg) in net.layers().iter().zip(&grads.layers) {
        if !layer.weights.same_shape(&lg.weights) || layer.bias.len() != lg.bias.len() {
            return Err(Error::dimension(
                "adam_step",
                format!(
                    "gradient shaped {}x{} for layer shaped {}x{}",
                    lg.weights.rows(),
                    lg.weights.cols(),
                    layer.weights.rows(),
                    layer.weights.cols()
                ),
            ));
        }
    }
    state.t += 1;
    let c = StepConstants {
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        bias1: 1.0 - cfg.beta1.powi(state.t as i32),
        bias2: 1.0 - cfg.beta2.powi(state.t as i32),
        learning_rate: cfg.learning_rate,
        epsilon: cfg.epsilon,
    };
    for (k, (layer, lg)) in net.layers_mut().iter_mut().zip(&grads.layers).enumerate() {
        update(
            layer.weights.data_mut(),
            lg.weights.data(),
            state.m_weights[k].data_mut(),
            state.v_weights[k].data_mut(),
            &c,
        );
        update(
            &mut layer.bias,
            &lg.bias,
            &mut state.m_bias[k],
            &mut state.v_bias[k],
            &c,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, DenseLayer, LayerGradient};

    fn one_param_net(w: f64) -> Network {
        Network::new(vec![DenseLayer::from_parts(
            Matrix::from_vec(1, 1, vec![w]).unwrap(),
            vec![0.0],
            Activation::Linear,
        )
        .unwrap()])
        .unwrap()
    }

    fn grad_bundle(g_w: f64, g_b: f64) -> GradientBundle {
        GradientBundle {
            layers: vec![LayerGradient {
                weights: Matrix::from_vec(1, 1, vec![g_w]).unwrap(),
                bias: vec![g_b],
            }],
            input: Matrix::zeros(1, 1),
        }
    }

    /// First two Adam steps on a single weight, against hand-computed values.
    ///
    /// With g = 1 constantly: step 1 gives m_hat = v_hat = 1 exactly, so the
    /// update is lr / (1 + eps). Step 2: m = 0.19, v = 0.001999,
    /// m_hat = 1, v_hat = 1, so the same update repeats.
    #[test]
    fn hand_computed_steps() {
        let cfg = AdamConfig::default();
        let mut net = one_param_net(0.5);
        let mut state = AdamState::new(&net);
        let g = grad_bundle(1.0, 0.0);

        adam_step(&mut net, &g, &mut state, &cfg).unwrap();
        let step1 = 1e-3 / (1.0 + 1e-8);
        assert!((net.layers()[0].weights.get(0, 0) - (0.5 - step1)).abs() < 1e-15);
        assert_eq!(state.step_count(), 1);

        adam_step(&mut net, &g, &mut state, &cfg).unwrap();
        let m2: f64 = 0.9 * 0.1 + 0.1; // 0.19
        let v2: f64 = 0.999 * 0.001 + 0.001; // 0.001999
        let m_hat = m2 / (1.0 - 0.9f64.powi(2));
        let v_hat = v2 / (1.0 - 0.999f64.powi(2));
        let step2 = 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((net.layers()[0].weights.get(0, 0) - (0.5 - step1 - step2)).abs() < 1e-15);

        // Bias untouched by a zero gradient.
        assert_eq!(net.layers()[0].bias[0], 0.0);
    }

    /// Adam on f(w) = (w - 3)^2 converges to the minimum.
    #[test]
    fn converges_on_quadratic() {
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut net = one_param_net(-2.0);
        let mut state = AdamState::new(&net);
        for _ in 0..2000 {
            let w = net.layers()[0].weights.get(0, 0);
            let g = grad_bundle(2.0 * (w - 3.0), 0.0);
            adam_step(&mut net, &g, &mut state, &cfg).unwrap();
        }
        let w = net.layers()[0].weights.get(0, 0);
        assert!((w - 3.0).abs() < 1e-3, "converged to {}", w);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let cfg = AdamConfig::default();
        let mut net = one_param_net(0.0);
        let mut state = AdamState::new(&net);
        let bad = GradientBundle {
            layers: vec![LayerGradient {
                weights: Matrix::zeros(2, 1),
                bias: vec![0.0, 0.0],
            }],
            input: Matrix::zeros(1, 1),
        };
        assert!(adam_step(&mut net, &bad, &mut state, &cfg).is_err());
    }

    #[test]
    fn deterministic_across_reruns() {
        let cfg = AdamConfig::default();
        let run = || {
            let mut net = one_param_net(1.0);
            let mut state = AdamState::new(&net);
            for k in 0..50 {
                let g = grad_bundle(((k % 7) as f64 - 3.0) * 0.25, 0.1);
                adam_step(&mut net, &g, &mut state, &cfg).unwrap();
            }
            (
                net.layers()[0].weights.get(0, 0).to_bits(),
                net.layers()[0].bias[0].to_bits(),
            )
        };
        assert_eq!(run(), run());
    }
}
