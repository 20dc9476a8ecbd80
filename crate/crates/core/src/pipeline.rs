//! The semantic transmission pipeline.
//!
//! An image batch flows encoder -> power normalization -> AWGN channel ->
//! decoder, and the reconstruction is judged twice: by MSE against the
//! original image and by a task classifier that must still recognize the
//! digit. The training loss couples the two:
//!
//! ```text
//! L = MSE(recon, input) + weight * max(0, CCE(classifier(recon), labels) - threshold)
//! ```
//!
//! with `threshold` the clean-input validation loss of the pretrained
//! classifier, so the penalty only acts while reconstructions are harder to
//! classify than clean images.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    cce_loss, load_network, mse_loss, save_network, Activation, ForwardTrace, GradientBundle,
    Matrix, Network, OutputGradient,
};

/// Layer widths for the three networks; hidden layers are ReLU, the encoder
/// head is linear, the decoder head sigmoid, and the classifier head softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            input_dim: 784,
            num_classes: 10,
            encoder_hidden: vec![512],
            decoder_hidden: vec![512],
            classifier_hidden: vec![256, 128],
        }
    }
}

impl ArchConfig {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes < 2 {
            return Err(Error::Config(format!(
                "need input_dim > 0 and at least 2 classes, got {} and {}",
                self.input_dim, self.num_classes
            )));
        }
        if self
            .encoder_hidden
            .iter()
            .chain(&self.decoder_hidden)
            .chain(&self.classifier_hidden)
            .any(|&w| w == 0)
        {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Builds the classifier alone (clean-input pretraining happens before
    /// any autoencoder exists).
    pub fn build_classifier(&self, rng: &mut impl Rng) -> Result<Network> {
        self.validate()?;
        let mut dims = vec![self.input_dim];
        dims.extend(&self.classifier_hidden);
        dims.push(self.num_classes);
        let mut acts = vec![Activation::Relu; self.classifier_hidden.len()];
        acts.push(Activation::Softmax);
        Network::glorot(&dims, &acts, rng)
    }

    /// Builds an encoder mapping images to `n_uses` linear latent values.
    pub fn build_encoder(&self, n_uses: usize, rng: &mut impl Rng) -> Result<Network> {
        self.validate()?;
        if n_uses == 0 {
            return Err(Error::Config("n_uses must be positive".into()));
        }
        let mut dims = vec![self.input_dim];
        dims.extend(&self.encoder_hidden);
        dims.push(n_uses);
        let mut acts = vec![Activation::Relu; self.encoder_hidden.len()];
        acts.push(Activation::Linear);
        Network::glorot(&dims, &acts, rng)
    }

    /// Builds a decoder mapping `n_uses` received values back to sigmoid
    /// pixel estimates.
    pub fn build_decoder(&self, n_uses: usize, rng: &mut impl Rng) -> Result<Network> {
        self.validate()?;
        if n_uses == 0 {
            return Err(Error::Config("n_uses must be positive".into()));
        }
        let mut dims = vec![n_uses];
        dims.extend(&self.decoder_hidden);
        dims.push(self.input_dim);
        let mut acts = vec![Activation::Relu; self.decoder_hidden.len()];
        acts.push(Activation::Sigmoid);
        Network::glorot(&dims, &acts, rng)
    }
}

/// Encoder, decoder, and semantic task classifier with agreeing shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSystem {
    pub encoder: Network,
    pub decoder: Network,
    pub classifier: Network,
}

impl SemanticSystem {
    pub fn new(encoder: Network, decoder: Network, classifier: Network) -> Result<Self> {
        if encoder.out_dim() != decoder.in_dim() {
            return Err(Error::dimension(
                "semantic system",
                format!(
                    "encoder emits {} channel uses, decoder expects {}",
                    encoder.out_dim(),
                    decoder.in_dim()
                ),
            ));
        }
        if encoder.in_dim() != decoder.out_dim() {
            return Err(Error::dimension(
                "semantic system",
                format!(
                    "encoder consumes {} pixels, decoder emits {}",
                    encoder.in_dim(),
                    decoder.out_dim()
                ),
            ));
        }
        if classifier.in_dim() != encoder.in_dim() {
            return Err(Error::dimension(
                "semantic system",
                format!(
                    "classifier consumes {} pixels, images have {}",
                    classifier.in_dim(),
                    encoder.in_dim()
                ),
            ));
        }
        if classifier.final_activation() != Activation::Softmax {
            return Err(Error::dimension(
                "semantic system",
                "classifier must end in softmax",
            ));
        }
        if decoder.final_activation() != Activation::Sigmoid {
            return Err(Error::dimension(
                "semantic system",
                "decoder must end in sigmoid so reconstructions stay in [0, 1]",
            ));
        }
        Ok(SemanticSystem {
            encoder,
            decoder,
            classifier,
        })
    }

    /// Glorot-initializes all three networks (encoder, then decoder, then
    /// classifier, in that stream order) for the given latent width.
    pub fn glorot(arch: &ArchConfig, n_uses: usize, rng: &mut impl Rng) -> Result<Self> {
        let encoder = arch.build_encoder(n_uses, rng)?;
        let decoder = arch.build_decoder(n_uses, rng)?;
        let classifier = arch.build_classifier(rng)?;
        SemanticSystem::new(encoder, decoder, classifier)
    }

    /// Channel uses per image (the latent width).
    pub fn n_uses(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.out_dim()
    }
}

/// Every intermediate of one transmission, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct TransmitTrace {
    pub encoder: ForwardTrace,
    /// Latent after power normalization (what actually enters the channel).
    pub normalized: Matrix,
    /// Channel output: `normalized + noise`.
    pub received: Matrix,
    pub decoder: ForwardTrace,
}

impl TransmitTrace {
    pub fn reconstruction(&self) -> &Matrix {
        self.decoder.output()
    }

    pub fn latent(&self) -> &Matrix {
        self.encoder.output()
    }
}

/// Runs a batch through encoder, normalization, and decoder with the given
/// additive channel noise (shaped `(batch, n_uses)`).
///
/// Noise enters as an explicit matrix so that training, evaluation, and
/// attack crafting can share or replay draws exactly.
pub fn transmit_trace(sys: &SemanticSystem, x: &Matrix, noise: &Matrix) -> Result<TransmitTrace> {
    let encoder = sys.encoder.forward_trace(x)?;
    let normalized = channel::power_normalize(encoder.output())?;
    if !noise.same_shape(&normalized) {
        return Err(Error::dimension(
            "transmit",
            format!(
                "noise is {}x{}, signal is {}x{}",
                noise.rows(),
                noise.cols(),
                normalized.rows(),
                normalized.cols()
            ),
        ));
    }
    let mut received = normalized.clone();
    received.add_assign(noise)?;
    let decoder = sys.decoder.forward_trace(&received)?;
    Ok(TransmitTrace {
        encoder,
        normalized,
        received,
        decoder,
    })
}

/// One full transmission with fresh AWGN at the configured SNR; returns the
/// reconstruction.
pub fn transmit(
    sys: &SemanticSystem,
    x: &Matrix,
    cfg: &ChannelConfig,
    rng: &mut impl Rng,
) -> Result<Matrix> {
    let noise = channel::noise_matrix(x.rows(), sys.n_uses(), cfg.noise_variance(), rng);
    Ok(transmit_trace(sys, x, &noise)?.decoder.output().clone())
}

/// Gradients of one scalar loss for both transmission-side networks.
#[derive(Debug)]
pub struct PipelineGradients {
    pub encoder: GradientBundle,
    pub decoder: GradientBundle,
}

impl PipelineGradients {
    /// Gradient with respect to the input images.
    pub fn input(&self) -> &Matrix {
        &self.encoder.input
    }

    pub fn all_finite(&self) -> bool {
        self.encoder.all_finite() && self.decoder.all_finite()
    }
}

/// Backpropagates a gradient on the reconstruction through decoder, channel
/// (identity, since the noise is additive), power normalization, and encoder.
pub fn transmit_backward(
    sys: &SemanticSystem,
    trace: &TransmitTrace,
    recon_grad: Matrix,
) -> Result<PipelineGradients> {
    let decoder = sys
        .decoder
        .backward(&trace.decoder, OutputGradient::Output(recon_grad))?;
    let d_latent = channel::power_normalize_backward(trace.encoder.output(), &decoder.input)?;
    let encoder = sys
        .encoder
        .backward(&trace.encoder, OutputGradient::Output(d_latent))?;
    Ok(PipelineGradients { encoder, decoder })
}

/// Like [`transmit_backward`] but propagates only to the input images,
/// skipping all parameter gradients; this is the cheap path for attack
/// crafting, where the networks are fixed.
pub fn transmit_input_gradient(
    sys: &SemanticSystem,
    trace: &TransmitTrace,
    recon_grad: Matrix,
) -> Result<Matrix> {
    let d_received = sys
        .decoder
        .input_gradient(&trace.decoder, OutputGradient::Output(recon_grad))?;
    let d_latent = channel::power_normalize_backward(trace.encoder.output(), &d_received)?;
    sys.encoder
        .input_gradient(&trace.encoder, OutputGradient::Output(d_latent))
}

/// How the classifier-loss excess enters the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// `max(0, cce - threshold)`: no penalty (and exactly zero gradient)
    /// once the classifier does as well as it did on clean inputs.
    Hinge,
    /// `cce - threshold` unconditionally; keeps pressure on the classifier
    /// term even below threshold.
    RawGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomLossConfig {
    /// Weight of the classifier penalty relative to the MSE term.
    pub weight: f64,
    /// Clean-input classifier loss that reconstruction must match.
    pub threshold: f64,
    pub penalty: PenaltyKind,
}

/// Value and partial gradients of the combined reconstruction/semantic loss.
///
/// `recon_grad` holds only the MSE part of `dL/d(recon)`; the classifier
/// part travels separately as a logits-space gradient (already scaled by the
/// penalty weight) because it must first be pulled back through the
/// classifier. [`custom_loss_backward`] combines the two.
#[derive(Debug, Clone)]
pub struct CustomLossValue {
    pub value: f64,
    pub mse: f64,
    pub classifier_cce: f64,
    pub penalty_active: bool,
    pub recon_grad: Matrix,
    pub classifier_logits_grad: Option<Matrix>,
}

/// Evaluates `L = MSE(recon, input) + weight * penalty(CCE - threshold)`.
///
/// With the hinge penalty, `CCE <= threshold` makes the classifier branch
/// contribute neither value nor gradient: the loss and its gradients reduce
/// exactly to plain MSE.
pub fn custom_loss(
    recon: &Matrix,
    input: &Matrix,
    class_probs: &Matrix,
    labels: &[u8],
    cfg: &CustomLossConfig,
) -> Result<CustomLossValue> {
    let (mse, recon_grad) = mse_loss(recon, input)?;
    let (cce, cce_logits_grad) = cce_loss(class_probs, labels)?;
    let gap = cce - cfg.threshold;
    let (penalty, active) = match cfg.penalty {
        PenaltyKind::Hinge => {
            if gap > 0.0 {
                (gap, true)
            } else {
                (0.0, false)
            }
        }
        PenaltyKind::RawGap => (gap, true),
    };
    let classifier_logits_grad =
        active.then(|| cce_logits_grad.map(|g| g * cfg.weight));
    Ok(CustomLossValue {
        value: mse + cfg.weight * penalty,
        mse,
        classifier_cce: cce,
        penalty_active: active,
        recon_grad,
        classifier_logits_grad,
    })
}

/// Backpropagates [`custom_loss`] to the encoder and decoder, treating the
/// classifier as fixed: its logits-space gradient is pulled back to the
/// reconstruction and merged with the MSE gradient before entering the
/// decoder.
pub fn custom_loss_backward(
    sys: &SemanticSystem,
    trace: &TransmitTrace,
    classifier_trace: &ForwardTrace,
    loss: &CustomLossValue,
) -> Result<PipelineGradients> {
    let mut recon_grad = loss.recon_grad.clone();
    if let Some(lg) = &loss.classifier_logits_grad {
        let through_classifier = sys
            .classifier
            .input_gradient(classifier_trace, OutputGradient::Logits(lg.clone()))?;
        recon_grad.add_assign(&through_classifier)?;
    }
    transmit_backward(sys, trace, recon_grad)
}

/// Index of the row maximum; ties break to the lowest index.
pub fn predict(probs: &Matrix) -> Vec<u8> {
    (0..probs.rows())
        .map(|r| {
            let row = probs.row(r);
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            best as u8
        })
        .collect()
}

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    hits as f64 / labels.len() as f64
}

/// Runs the task classifier on reconstructions and scores it against the
/// true labels, returning the per-sample predictions and the accuracy.
pub fn classify(sys: &SemanticSystem, recon: &Matrix, labels: &[u8]) -> Result<(Vec<u8>, f64)> {
    if recon.rows() != labels.len() {
        return Err(Error::dimension(
            "classify",
            format!("{} reconstructions vs {} labels", recon.rows(), labels.len()),
        ));
    }
    let probs = sys.classifier.forward(recon)?;
    let preds = predict(&probs);
    let acc = accuracy(&preds, labels);
    Ok((preds, acc))
}

/// Reconstruction MSE and task accuracy over a full transmission pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub mse: f64,
    pub accuracy: f64,
}

/// Transmits `images` in batches with fresh noise from `rng` and aggregates
/// MSE (over every pixel) and classifier accuracy.
pub fn evaluate(
    sys: &SemanticSystem,
    images: &Matrix,
    labels: &[u8],
    cfg: &ChannelConfig,
    rng: &mut impl Rng,
) -> Result<EvalMetrics> {
    if images.rows() != labels.len() {
        return Err(Error::dimension(
            "evaluate",
            format!("{} images vs {} labels", images.rows(), labels.len()),
        ));
    }
    if images.rows() == 0 {
        return Err(Error::Config("cannot evaluate on an empty set".into()));
    }
    const BATCH: usize = 250;
    let mut sq_err = 0.0;
    let mut hits = 0usize;
    let mut row = 0;
    while row < images.rows() {
        let end = (row + BATCH).min(images.rows());
        let idx: Vec<u32> = (row as u32..end as u32).collect();
        let batch = images.gather_rows(&idx)?;
        let recon = transmit(sys, &batch, cfg, rng)?;
        for (a, b) in recon.data().iter().zip(batch.data()) {
            let d = a - b;
            sq_err += d * d;
        }
        let probs = sys.classifier.forward(&recon)?;
        for (p, &l) in predict(&probs).iter().zip(&labels[row..end]) {
            hits += usize::from(*p == l);
        }
        row = end;
    }
    Ok(EvalMetrics {
        mse: sq_err / (images.rows() * images.cols()) as f64,
        accuracy: hits as f64 / images.rows() as f64,
    })
}

/// Sidecar metadata stored with a trained system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub n_uses: usize,
    pub snr_db: f64,
    pub loss_weight: f64,
    pub loss_threshold: f64,
    pub rounds_completed: usize,
    pub seed: u64,
}

const ENCODER_FILE: &str = "encoder.bin";
const DECODER_FILE: &str = "decoder.bin";
const CLASSIFIER_FILE: &str = "classifier.bin";
const MANIFEST_FILE: &str = "manifest.toml";

/// Writes the three networks plus the manifest into `dir` (created if
/// needed).
pub fn save_checkpoint(
    sys: &SemanticSystem,
    manifest: &CheckpointManifest,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_network(&sys.encoder, &dir.join(ENCODER_FILE))?;
    save_network(&sys.decoder, &dir.join(DECODER_FILE))?;
    save_network(&sys.classifier, &dir.join(CLASSIFIER_FILE))?;
    let text = toml::to_string(manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {}", e)))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(SemanticSystem, CheckpointManifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::MissingInput(format!("{}: {}", manifest_path.display(), e)))?;
    let manifest: CheckpointManifest = toml::from_str(&text)
        .map_err(|e| Error::parse(&manifest_path, e.to_string()))?;
    let sys = SemanticSystem::new(
        load_network(&dir.join(ENCODER_FILE))?,
        load_network(&dir.join(DECODER_FILE))?,
        load_network(&dir.join(CLASSIFIER_FILE))?,
    )?;
    if sys.n_uses() != manifest.n_uses {
        return Err(Error::parse(
            &manifest_path,
            format!(
                "manifest says {} channel uses but encoder emits {}",
                manifest.n_uses,
                sys.n_uses()
            ),
        ));
    }
    Ok((sys, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A small system (6 pixels, 4 channel uses) for gradient checks.
    fn tiny_system(seed: u64) -> SemanticSystem {
        let arch = ArchConfig {
            input_dim: 6,
            num_classes: 3,
            encoder_hidden: vec![5],
            decoder_hidden: vec![5],
            classifier_hidden: vec![4],
        };
        let mut rng = crate::rng::stream(seed, "pipeline-test", 0, 0);
        SemanticSystem::glorot(&arch, 4, &mut rng).unwrap()
    }

    fn tiny_batch(rows: usize, seed: u64) -> (Matrix, Vec<u8>) {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, "pipeline-test-data", 0, 0);
        let images = Matrix::from_vec(
            rows,
            6,
            (0..rows * 6).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let labels = (0..rows).map(|_| rng.random_range(0..3u8) as u8).collect();
        (images, labels)
    }

    #[test]
    fn construction_validates_shapes_and_heads() {
        let sys = tiny_system(1);
        assert_eq!(sys.n_uses(), 4);
        assert_eq!(sys.input_dim(), 6);
        assert_eq!(sys.num_classes(), 3);

        // Decoder that does not end in sigmoid.
        let mut rng = crate::rng::stream(2, "pipeline-test", 1, 0);
        let enc = Network::glorot(&[6, 4], &[Activation::Linear], &mut rng).unwrap();
        let dec = Network::glorot(&[4, 6], &[Activation::Linear], &mut rng).unwrap();
        let cls = Network::glorot(&[6, 3], &[Activation::Softmax], &mut rng).unwrap();
        assert!(SemanticSystem::new(enc.clone(), dec, cls.clone()).is_err());

        // Classifier that does not end in softmax.
        let dec_ok = Network::glorot(&[4, 6], &[Activation::Sigmoid], &mut rng).unwrap();
        let cls_bad = Network::glorot(&[6, 3], &[Activation::Sigmoid], &mut rng).unwrap();
        assert!(SemanticSystem::new(enc.clone(), dec_ok.clone(), cls_bad).is_err());

        // Latent width mismatch.
        let dec_wide = Network::glorot(&[5, 6], &[Activation::Sigmoid], &mut rng).unwrap();
        assert!(SemanticSystem::new(enc, dec_wide, cls).is_err());
    }

    #[test]
    fn transmit_composes_normalization_noise_and_decoder() {
        let sys = tiny_system(3);
        let (x, _) = tiny_batch(5, 4);
        let mut rng = crate::rng::stream(5, "pipeline-test", 2, 0);
        let noise = channel::noise_matrix(5, 4, 0.5, &mut rng);
        let trace = transmit_trace(&sys, &x, &noise).unwrap();

        // Normalized rows have unit mean square.
        for r in 0..5 {
            let ms: f64 = trace.normalized.row(r).iter().map(|v| v * v).sum::<f64>() / 4.0;
            assert!((ms - 1.0).abs() < 1e-9);
        }
        // Received is exactly normalized + noise.
        for ((r, n), v) in trace
            .received
            .data()
            .iter()
            .zip(noise.data())
            .zip(trace.normalized.data())
        {
            assert_eq!(*r, v + n);
        }
        // Reconstructions live in [0, 1] (sigmoid head).
        assert!(trace
            .reconstruction()
            .data()
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v)));
        // Shape mismatch in noise is rejected.
        assert!(transmit_trace(&sys, &x, &Matrix::zeros(5, 3)).is_err());
    }

    #[test]
    fn transmit_is_deterministic_per_stream() {
        let sys = tiny_system(6);
        let (x, _) = tiny_batch(4, 7);
        let cfg = ChannelConfig { snr_db: 5.0, n_uses: 4 };
        let mut r1 = crate::rng::stream(8, "pipeline-test", 3, 0);
        let mut r2 = crate::rng::stream(8, "pipeline-test", 3, 0);
        let a = transmit(&sys, &x, &cfg, &mut r1).unwrap();
        let b = transmit(&sys, &x, &cfg, &mut r2).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn custom_loss_hand_values() {
        // Single pixel pair with squared error 0.04; MSE = 0.04.
        let recon = Matrix::from_vec(1, 1, vec![0.7]).unwrap();
        let input = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
        let probs = Matrix::from_vec(1, 2, vec![0.25, 0.75]).unwrap();
        let labels = [0u8];
        let cce = -(0.25f64.ln()); // ~1.386

        // Active hinge: threshold one below the CCE, weight 0.2.
        let cfg = CustomLossConfig {
            weight: 0.2,
            threshold: cce - 1.0,
            penalty: PenaltyKind::Hinge,
        };
        let loss = custom_loss(&recon, &input, &probs, &labels, &cfg).unwrap();
        assert!((loss.mse - 0.04).abs() < 1e-12);
        assert!((loss.classifier_cce - cce).abs() < 1e-12);
        assert!(loss.penalty_active);
        assert!((loss.value - (0.04 + 0.2 * 1.0)).abs() < 1e-12);
        // The logits gradient is the fused CCE gradient scaled by the weight.
        let lg = loss.classifier_logits_grad.as_ref().unwrap();
        assert!((lg.get(0, 0) - 0.2 * (0.25 - 1.0)).abs() < 1e-12);
        assert!((lg.get(0, 1) - 0.2 * 0.75).abs() < 1e-12);

        // Inactive hinge: threshold above the CCE. Loss is exactly MSE and
        // the classifier branch carries no gradient at all.
        let cfg = CustomLossConfig {
            weight: 0.2,
            threshold: cce + 0.1,
            penalty: PenaltyKind::Hinge,
        };
        let loss = custom_loss(&recon, &input, &probs, &labels, &cfg).unwrap();
        assert_eq!(loss.value, loss.mse);
        assert!(!loss.penalty_active);
        assert!(loss.classifier_logits_grad.is_none());

        // Raw-gap variant keeps the (negative) gap and the gradient.
        let cfg = CustomLossConfig {
            weight: 0.2,
            threshold: cce + 0.1,
            penalty: PenaltyKind::RawGap,
        };
        let loss = custom_loss(&recon, &input, &probs, &labels, &cfg).unwrap();
        assert!((loss.value - (0.04 + 0.2 * -0.1)).abs() < 1e-12);
        assert!(loss.classifier_logits_grad.is_some());
    }

    #[test]
    fn hinge_boundary_has_zero_penalty_and_gradient() {
        let recon = Matrix::from_vec(1, 1, vec![0.7]).unwrap();
        let input = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
        let probs = Matrix::from_vec(1, 2, vec![0.25, 0.75]).unwrap();
        let cce = -(0.25f64.ln());
        let cfg = CustomLossConfig {
            weight: 0.2,
            threshold: cce, // gap is exactly zero
            penalty: PenaltyKind::Hinge,
        };
        let loss = custom_loss(&recon, &input, &probs, &[0], &cfg).unwrap();
        assert_eq!(loss.value, loss.mse);
        assert!(!loss.penalty_active);
        assert!(loss.classifier_logits_grad.is_none());
    }

    /// End-to-end finite-difference check of the full training gradient:
    /// input -> encoder -> normalize -> (fixed noise) -> decoder ->
    /// classifier -> combined loss, with the hinge active.
    #[test]
    fn pipeline_gradient_matches_finite_differences() {
        let sys = tiny_system(9);
        let (x, labels) = tiny_batch(3, 10);
        let mut rng = crate::rng::stream(11, "pipeline-test", 4, 0);
        let noise = channel::noise_matrix(3, 4, 0.3, &mut rng);
        let cfg = CustomLossConfig {
            weight: 0.2,
            threshold: 0.0, // CCE of a fresh classifier is far above zero
            penalty: PenaltyKind::Hinge,
        };

        let loss_at = |sys: &SemanticSystem, x: &Matrix| -> f64 {
            let trace = transmit_trace(sys, x, &noise).unwrap();
            let probs = sys.classifier.forward(trace.reconstruction()).unwrap();
            custom_loss(trace.reconstruction(), x, &probs, &labels, &cfg)
                .unwrap()
                .value
        };

        let trace = transmit_trace(&sys, &x, &noise).unwrap();
        let cls_trace = sys.classifier.forward_trace(trace.reconstruction()).unwrap();
        let loss = custom_loss(trace.reconstruction(), &x, cls_trace.output(), &labels, &cfg)
            .unwrap();
        assert!(loss.penalty_active);
        let grads = custom_loss_backward(&sys, &trace, &cls_trace, &loss).unwrap();
        assert!(grads.all_finite());

        let h = 1e-5;
        // Input gradient. Note the MSE target is the input itself, so the
        // analytic gradient includes the direct -2(recon - x)/n term as well
        // as the path through the encoder; the loss closure sees both.
        for idx in 0..x.data().len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus.data_mut()[idx] += h;
            minus.data_mut()[idx] -= h;
            let fd = (loss_at(&sys, &plus) - loss_at(&sys, &minus)) / (2.0 * h);
            // grads.input() is dL/dx holding the MSE *target* fixed; the
            // probe also moves the target, whose contribution is
            // -recon_grad (d/dt of (r - t)^2 is -(d/dr)).
            let analytic = grads.input().data()[idx] - loss.recon_grad.data()[idx];
            let denom = fd.abs().max(analytic.abs()).max(1e-6);
            assert!(
                ((fd - analytic) / denom).abs() < 1e-3,
                "input {}: fd {} vs analytic {}",
                idx,
                fd,
                analytic
            );
        }

        // Encoder and decoder parameter gradients (spread of coordinates).
        for (net_name, bundle, layer_count) in [
            ("encoder", &grads.encoder, sys.encoder.layers().len()),
            ("decoder", &grads.decoder, sys.decoder.layers().len()),
        ] {
            for li in 0..layer_count {
                let n_w = bundle.layers[li].weights.data().len();
                for probe in 0..8usize.min(n_w) {
                    let idx = (probe * 5 + 1) % n_w;
                    let mut plus = sys.clone();
                    let mut minus = sys.clone();
                    {
                        let net = if net_name == "encoder" {
                            &mut plus.encoder
                        } else {
                            &mut plus.decoder
                        };
                        net.layers_mut()[li].weights.data_mut()[idx] += h;
                    }
                    {
                        let net = if net_name == "encoder" {
                            &mut minus.encoder
                        } else {
                            &mut minus.decoder
                        };
                        net.layers_mut()[li].weights.data_mut()[idx] -= h;
                    }
                    let fd = (loss_at(&plus, &x) - loss_at(&minus, &x)) / (2.0 * h);
                    let analytic = bundle.layers[li].weights.data()[idx];
                    let denom = fd.abs().max(analytic.abs()).max(1e-6);
                    assert!(
                        ((fd - analytic) / denom).abs() < 1e-3,
                        "{} layer {} weight {}: fd {} vs analytic {}",
                        net_name,
                        li,
                        idx,
                        fd,
                        analytic
                    );
                }
            }
        }
    }

    /// With the hinge inactive the pipeline gradient must equal the pure-MSE
    /// gradient exactly — not approximately.
    #[test]
    fn inactive_hinge_reduces_to_mse_gradient() {
        let sys = tiny_system(12);
        let (x, labels) = tiny_batch(4, 13);
        let mut rng = crate::rng::stream(14, "pipeline-test", 5, 0);
        let noise = channel::noise_matrix(4, 4, 0.2, &mut rng);
        let trace = transmit_trace(&sys, &x, &noise).unwrap();
        let cls_trace = sys.classifier.forward_trace(trace.reconstruction()).unwrap();
        let cfg = CustomLossConfig {
            weight: 0.2,
            threshold: 1e6,
            penalty: PenaltyKind::Hinge,
        };
        let loss = custom_loss(trace.reconstruction(), &x, cls_trace.output(), &labels, &cfg)
            .unwrap();
        let combined = custom_loss_backward(&sys, &trace, &cls_trace, &loss).unwrap();
        let (_, mse_grad) = mse_loss(trace.reconstruction(), &x).unwrap();
        let pure = transmit_backward(&sys, &trace, mse_grad).unwrap();
        assert_eq!(combined.encoder.input.data(), pure.encoder.input.data());
        for (a, b) in combined.decoder.layers.iter().zip(&pure.decoder.layers) {
            assert_eq!(a.weights.data(), b.weights.data());
        }
    }

    #[test]
    fn predict_breaks_ties_low_and_scores_accuracy() {
        let probs = Matrix::from_vec(3, 3, vec![
            0.5, 0.5, 0.0, // tie -> class 0
            0.1, 0.2, 0.7, // class 2
            0.4, 0.5, 0.1, // class 1
        ])
        .unwrap();
        assert_eq!(predict(&probs), vec![0, 2, 1]);
        assert!((accuracy(&[0, 2, 1], &[0, 2, 2]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&[], &[]), 0.0);
    }

    #[test]
    fn classify_checks_shapes() {
        let sys = tiny_system(15);
        let (x, labels) = tiny_batch(3, 16);
        let (preds, acc) = classify(&sys, &x, &labels).unwrap();
        assert_eq!(preds.len(), 3);
        assert!((0.0..=1.0).contains(&acc));
        assert!(classify(&sys, &x, &labels[..2]).is_err());
    }

    #[test]
    fn evaluate_is_deterministic_and_bounded() {
        let sys = tiny_system(17);
        let (x, labels) = tiny_batch(40, 18);
        let cfg = ChannelConfig { snr_db: 10.0, n_uses: 4 };
        let mut r1 = crate::rng::stream(19, "pipeline-test", 6, 0);
        let mut r2 = crate::rng::stream(19, "pipeline-test", 6, 0);
        let a = evaluate(&sys, &x, &labels, &cfg, &mut r1).unwrap();
        let b = evaluate(&sys, &x, &labels, &cfg, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.mse > 0.0);
        assert!((0.0..=1.0).contains(&a.accuracy));
        assert!(evaluate(&sys, &Matrix::zeros(0, 6), &[], &cfg, &mut r1).is_err());
    }

    #[test]
    fn checkpoint_round_trip_reproduces_evaluation_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let sys = tiny_system(20);
        let manifest = CheckpointManifest {
            n_uses: 4,
            snr_db: 5.0,
            loss_weight: 0.2,
            loss_threshold: 0.11,
            rounds_completed: 5,
            seed: 20,
        };
        save_checkpoint(&sys, &manifest, dir.path()).unwrap();
        let (loaded, manifest2) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(manifest, manifest2);
        assert_eq!(sys, loaded);

        let (x, labels) = tiny_batch(10, 21);
        let cfg = ChannelConfig { snr_db: 5.0, n_uses: 4 };
        let mut r1 = crate::rng::stream(22, "pipeline-test", 7, 0);
        let mut r2 = crate::rng::stream(22, "pipeline-test", 7, 0);
        let a = evaluate(&sys, &x, &labels, &cfg, &mut r1).unwrap();
        let b = evaluate(&loaded, &x, &labels, &cfg, &mut r2).unwrap();
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
    }

    #[test]
    fn checkpoint_load_rejects_missing_or_mismatched_parts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(Error::MissingInput(_))
        ));

        let sys = tiny_system(23);
        let manifest = CheckpointManifest {
            n_uses: 9, // wrong on purpose
            snr_db: 5.0,
            loss_weight: 0.2,
            loss_threshold: 0.1,
            rounds_completed: 1,
            seed: 23,
        };
        save_checkpoint(&sys, &manifest, dir.path()).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Parse { .. })));
    }
}
