//! Task-oriented semantic communication laboratory.
//!
//! The crate trains a three-network system — an image encoder, a decoder, and
//! a semantic task classifier — end to end across a simulated AWGN channel,
//! then evaluates how adversarial perturbations in the image domain, the
//! wireless domain, or both degrade the semantic task.
//!
//! Layout:
//! - [`numerics`]: dense matrices, feedforward networks, explicit backprop,
//!   losses, Adam, and binary weight persistence.
//! - [`data`]: IDX image/label parsing and per-round data sampling.
//! - [`channel`]: power normalization, AWGN, and SNR/PNR conversions.
//! - [`pipeline`]: the encoder/channel/decoder/classifier composition and the
//!   threshold-gated training loss.
//! - [`training`]: classifier pretraining and the multi-round interactive
//!   training loop.
//! - [`attacks`]: FGSM-style image and wireless perturbations, Gaussian
//!   jamming, and attack evaluation.
//! - [`harness`]: TOML-configured experiments producing CSV, manifest, and
//!   SVG outputs.

pub mod attacks;
pub mod channel;
pub mod data;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
