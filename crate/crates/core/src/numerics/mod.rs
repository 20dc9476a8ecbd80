//! Dense linear algebra and a small feedforward-network engine.
//!
//! Everything is `f64` and single-threaded; determinism comes from fixed
//! loop orders and fixed reduction trees, so repeated runs are bit-identical.

mod activation;
mod adam;
mod layer;
mod loss;
mod matrix;
mod network;
mod weights_io;

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, AdamState};
pub use layer::DenseLayer;
pub use loss::{cce_loss, mse_loss};
pub use matrix::Matrix;
pub use network::{ForwardTrace, GradientBundle, LayerGradient, Network, OutputGradient};
pub use weights_io::{load_network, save_network};
