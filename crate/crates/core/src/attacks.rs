//! Adversarial attacks on the trained system and their evaluation.
//!
//! All attacks are single-shot, white-box, and gradient-based:
//!
//! - **Image domain**: FGSM on the transmitter input. The sign of the
//!   classifier-loss gradient, taken through the whole pipeline (encoder,
//!   normalization, the channel's additive noise, decoder, classifier), moves
//!   every pixel by `epsilon`, then the result is clipped back to `[0, 1]`.
//! - **Wireless domain**: a power-constrained gradient perturbation added to
//!   the received signal. The gradient with respect to the decoder input is
//!   power-normalized per sample and scaled to an exact perturbation power
//!   `p`, fixed by the perturbation-to-noise ratio.
//! - **Multi-domain**: the image attack first, then the wireless attack on
//!   the resulting received signal.
//! - **Gaussian jamming**: the non-adversarial baseline; random noise of the
//!   same power `p` added to the received signal.
//!
//! Crafting and evaluation share one channel-noise draw per sample: the
//! attacker perturbs exactly the transmission being scored.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{self, ChannelConfig};
use crate::error::{Error, Result};
use crate::numerics::{cce_loss, Matrix, OutputGradient};
use crate::pipeline::{predict, transmit_input_gradient, transmit_trace, SemanticSystem};
use crate::rng;

/// Whether the attack pushes away from the true class or toward a chosen one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    NonTargeted,
    /// Push every sample toward this class.
    Targeted(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackDomain {
    Image,
    Wireless,
    MultiDomain,
    GaussianJam,
}

/// Full description of one attack evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub domain: AttackDomain,
    pub mode: AttackMode,
    /// Image-domain strength (max per-pixel change).
    pub epsilon: f64,
    /// Wireless-domain strength as perturbation-to-noise ratio in dB.
    pub pnr_db: f64,
    /// Image strength of the image stage inside a multi-domain attack.
    pub image_epsilon: f64,
    /// Seed for the shared channel noise, jamming draws, and zero-gradient
    /// fallbacks.
    pub seed: u64,
    /// Craft the wireless perturbation from the pre-noise transmitted signal
    /// instead of the received one: an attacker who knows the weights but
    /// not the live noise realization. The perturbation is still applied to
    /// the actual received signal.
    pub craft_pre_noise: bool,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            domain: AttackDomain::Image,
            mode: AttackMode::NonTargeted,
            epsilon: 0.3,
            pnr_db: 0.0,
            image_epsilon: 0.1,
            seed: 0,
            craft_pre_noise: false,
        }
    }
}

/// Labels the crafting gradient is taken against, and the ascent/descent
/// sign: non-targeted attacks climb the true-label loss (+1), targeted
/// attacks descend the target-label loss (-1).
fn crafting_labels(mode: AttackMode, labels: &[u8]) -> (Vec<u8>, f64) {
    match mode {
        AttackMode::NonTargeted => (labels.to_vec(), 1.0),
        AttackMode::Targeted(t) => (vec![t; labels.len()], -1.0),
    }
}

/// FGSM in the image domain against one transmission with the given channel
/// noise: `x_adv = clip(x + direction * epsilon * sign(dL/dx), 0, 1)`.
///
/// The gradient is taken through the entire pipeline with the noise held
/// fixed, so the crafted image targets exactly the transmission that will be
/// evaluated.
pub fn craft_image(
    sys: &SemanticSystem,
    x: &Matrix,
    labels: &[u8],
    mode: AttackMode,
    epsilon: f64,
    noise: &Matrix,
) -> Result<Matrix> {
    if epsilon < 0.0 {
        return Err(Error::Config(format!("epsilon must be nonnegative, got {}", epsilon)));
    }
    if x.rows() != labels.len() {
        return Err(Error::dimension(
            "craft_image",
            format!("{} images vs {} labels", x.rows(), labels.len()),
        ));
    }
    if epsilon == 0.0 {
        return Ok(x.clone());
    }
    let (grad_labels, direction) = crafting_labels(mode, labels);
    let trace = transmit_trace(sys, x, noise)?;
    let cls_trace = sys.classifier.forward_trace(trace.reconstruction())?;
    let (_, logits_grad) = cce_loss(cls_trace.output(), &grad_labels)?;
    let d_recon = sys
        .classifier
        .input_gradient(&cls_trace, OutputGradient::Logits(logits_grad))?;
    let dx = transmit_input_gradient(sys, &trace, d_recon)?;

    let mut adv = x.clone();
    for (a, g) in adv.data_mut().iter_mut().zip(dx.data()) {
        *a = (*a + direction * epsilon * g.signum()).clamp(0.0, 1.0);
    }
    Ok(adv)
}

/// Power-constrained gradient perturbation in the wireless domain.
///
/// Returns the additive perturbation for `received` (shaped like it) with
/// per-sample mean square exactly `power`, plus the number of samples that
/// fell back to a random direction because their gradient was identically
/// zero.
pub fn craft_wireless(
    sys: &SemanticSystem,
    received: &Matrix,
    labels: &[u8],
    mode: AttackMode,
    power: f64,
    fallback_rng: &mut impl Rng,
) -> Result<(Matrix, usize)> {
    if power < 0.0 {
        return Err(Error::Config(format!("power must be nonnegative, got {}", power)));
    }
    if received.rows() != labels.len() {
        return Err(Error::dimension(
            "craft_wireless",
            format!("{} received rows vs {} labels", received.rows(), labels.len()),
        ));
    }
    let (grad_labels, direction) = crafting_labels(mode, labels);
    let dec_trace = sys.decoder.forward_trace(received)?;
    let cls_trace = sys.classifier.forward_trace(dec_trace.output())?;
    let (_, logits_grad) = cce_loss(cls_trace.output(), &grad_labels)?;
    let d_recon = sys
        .classifier
        .input_gradient(&cls_trace, OutputGradient::Logits(logits_grad))?;
    let d_received = sys
        .decoder
        .input_gradient(&dec_trace, OutputGradient::Output(d_recon))?;

    let n = received.cols() as f64;
    let mut delta = Matrix::zeros(received.rows(), received.cols());
    let mut fallbacks = 0usize;
    for r in 0..received.rows() {
        let g = d_received.row(r);
        let mut mean_sq: f64 = g.iter().map(|v| v * v).sum::<f64>() / n;
        let row = delta.row_mut(r);
        if mean_sq <= 0.0 || !mean_sq.is_finite() {
            // No usable gradient direction; spend the power budget on a
            // random direction instead of wasting the shot.
            fallbacks += 1;
            for v in row.iter_mut() {
                let draw: f64 = StandardNormal.sample(fallback_rng);
                *v = draw;
            }
            mean_sq = row.iter().map(|v| v * v).sum::<f64>() / n;
            let scale = (power / mean_sq).sqrt();
            for v in row.iter_mut() {
                *v *= scale;
            }
        } else {
            let scale = direction * (power / mean_sq).sqrt();
            for (v, &gv) in row.iter_mut().zip(g) {
                *v = scale * gv;
            }
        }
    }
    if fallbacks > 0 {
        log::warn!(
            "wireless attack: {} of {} samples had zero gradient; used random directions",
            fallbacks,
            received.rows()
        );
    }
    Ok((delta, fallbacks))
}

/// Gaussian jamming baseline: i.i.d. `N(0, power)` per received dimension,
/// matching the adversarial perturbation's power in expectation only.
pub fn gaussian_jam(rows: usize, cols: usize, power: f64, rng: &mut impl Rng) -> Matrix {
    channel::noise_matrix(rows, cols, power, rng)
}

/// Outcome of one attack evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessReport {
    /// Non-targeted: fraction of cleanly-correct samples the attack flips.
    /// Targeted: fraction of cleanly-correct, non-target-class samples
    /// pushed into the target class. Zero when no sample is eligible.
    pub success: f64,
    /// Classifier accuracy under attack, over all samples.
    pub accuracy: f64,
    /// Classifier accuracy of the same transmissions without the attack.
    pub clean_accuracy: f64,
    /// Reconstruction MSE under attack, against the transmitted image (the
    /// adversarial image for image-domain attacks).
    pub mse: f64,
    /// Samples counted in the success denominator.
    pub eligible: usize,
    /// Zero-gradient fallbacks taken by the wireless stage.
    pub fallbacks: usize,
}

/// Evaluates one attack over a sample set, single-shot: the channel noise
/// drawn per sample is shared between the clean reference pass, crafting,
/// and the attacked pass.
pub fn evaluate_attack(
    sys: &SemanticSystem,
    images: &Matrix,
    labels: &[u8],
    spec: &AttackSpec,
    cfg: &ChannelConfig,
) -> Result<SuccessReport> {
    if images.rows() != labels.len() {
        return Err(Error::dimension(
            "evaluate_attack",
            format!("{} images vs {} labels", images.rows(), labels.len()),
        ));
    }
    if images.rows() == 0 {
        return Err(Error::Config("cannot evaluate an attack on an empty set".into()));
    }
    if let AttackMode::Targeted(t) = spec.mode {
        if (t as usize) >= sys.num_classes() {
            return Err(Error::LabelOutOfRange {
                label: t as usize,
                num_classes: sys.num_classes(),
            });
        }
    }
    if spec.epsilon < 0.0 || spec.image_epsilon < 0.0 {
        return Err(Error::Config("attack strengths must be nonnegative".into()));
    }

    let power = channel::pnr_to_power(spec.pnr_db, cfg.snr_db);
    let noise_var = cfg.noise_variance();
    let mut noise_rng = rng::stream(spec.seed, "attack-noise", 0, 0);
    let mut jam_rng = rng::stream(spec.seed, "attack-jam", 0, 0);
    let mut fallback_rng = rng::stream(spec.seed, "attack-fallback", 0, 0);

    let mut clean_hits = 0usize;
    let mut adv_hits = 0usize;
    let mut flipped = 0usize;
    let mut pushed_to_target = 0usize;
    let mut eligible = 0usize;
    let mut fallbacks = 0usize;
    let mut sq_err = 0.0;

    const BATCH: usize = 250;
    let mut row = 0;
    while row < images.rows() {
        let end = (row + BATCH).min(images.rows());
        let idx: Vec<u32> = (row as u32..end as u32).collect();
        let x = images.gather_rows(&idx)?;
        let batch_labels = &labels[row..end];
        let noise = channel::noise_matrix(x.rows(), sys.n_uses(), noise_var, &mut noise_rng);

        let clean_trace = transmit_trace(sys, &x, &noise)?;
        let clean_probs = sys.classifier.forward(clean_trace.reconstruction())?;
        let clean_preds = predict(&clean_probs);

        // The attacked reconstruction and the image it should be compared
        // against (for image-domain attacks, the adversarial image is what
        // the transmitter actually sent).
        let (recon, reference) = match spec.domain {
            AttackDomain::Image => {
                let x_adv = craft_image(sys, &x, batch_labels, spec.mode, spec.epsilon, &noise)?;
                let trace = transmit_trace(sys, &x_adv, &noise)?;
                (trace.decoder.output().clone(), x_adv)
            }
            AttackDomain::Wireless => {
                let craft_on = if spec.craft_pre_noise {
                    &clean_trace.normalized
                } else {
                    &clean_trace.received
                };
                let (delta, fb) = craft_wireless(
                    sys,
                    craft_on,
                    batch_labels,
                    spec.mode,
                    power,
                    &mut fallback_rng,
                )?;
                fallbacks += fb;
                let mut received = clean_trace.received.clone();
                received.add_assign(&delta)?;
                (sys.decoder.forward(&received)?, x.clone())
            }
            AttackDomain::GaussianJam => {
                let jam = gaussian_jam(x.rows(), sys.n_uses(), power, &mut jam_rng);
                let mut received = clean_trace.received.clone();
                received.add_assign(&jam)?;
                (sys.decoder.forward(&received)?, x.clone())
            }
            AttackDomain::MultiDomain => {
                let x_adv =
                    craft_image(sys, &x, batch_labels, spec.mode, spec.image_epsilon, &noise)?;
                let trace = transmit_trace(sys, &x_adv, &noise)?;
                let craft_on = if spec.craft_pre_noise { &trace.normalized } else { &trace.received };
                let (delta, fb) = craft_wireless(
                    sys,
                    craft_on,
                    batch_labels,
                    spec.mode,
                    power,
                    &mut fallback_rng,
                )?;
                fallbacks += fb;
                let mut received = trace.received.clone();
                received.add_assign(&delta)?;
                (sys.decoder.forward(&received)?, x_adv)
            }
        };

        let adv_probs = sys.classifier.forward(&recon)?;
        let adv_preds = predict(&adv_probs);

        for (d, r) in recon.data().iter().zip(reference.data()) {
            let e = d - r;
            sq_err += e * e;
        }
        for i in 0..batch_labels.len() {
            let label = batch_labels[i];
            let clean_ok = clean_preds[i] == label;
            clean_hits += usize::from(clean_ok);
            adv_hits += usize::from(adv_preds[i] == label);
            if !clean_ok {
                continue;
            }
            match spec.mode {
                AttackMode::NonTargeted => {
                    eligible += 1;
                    flipped += usize::from(adv_preds[i] != label);
                }
                AttackMode::Targeted(t) => {
                    if label != t {
                        eligible += 1;
                        pushed_to_target += usize::from(adv_preds[i] == t);
                    }
                }
            }
        }
        row = end;
    }

    let n = images.rows() as f64;
    let success = if eligible == 0 {
        0.0
    } else {
        match spec.mode {
            AttackMode::NonTargeted => flipped as f64 / eligible as f64,
            AttackMode::Targeted(_) => pushed_to_target as f64 / eligible as f64,
        }
    };
    Ok(SuccessReport {
        success,
        accuracy: adv_hits as f64 / n,
        clean_accuracy: clean_hits as f64 / n,
        mse: sq_err / (images.rows() * images.cols()) as f64,
        eligible,
        fallbacks,
    })
}

/// Per-class targeted success rates.
///
/// `rates[i][j]` is the fraction of cleanly-correct class-`i` samples that a
/// `j`-targeted attack pushes into class `j`; the diagonal is left as NaN
/// (attacking a sample into its own class is undefined).
#[derive(Debug, Clone)]
pub struct SuccessMatrix {
    pub rates: Vec<Vec<f64>>,
}

/// Runs a targeted attack for every target class and assembles the success
/// matrix. All targets share the same channel noise and clean pass, so the
/// matrix is internally consistent.
pub fn targeted_success_matrix(
    sys: &SemanticSystem,
    images: &Matrix,
    labels: &[u8],
    spec: &AttackSpec,
    cfg: &ChannelConfig,
) -> Result<SuccessMatrix> {
    let classes = sys.num_classes();
    let mut hits = vec![vec![0usize; classes]; classes];
    let mut counts = vec![0usize; classes];

    for target in 0..classes {
        let spec_t = AttackSpec {
            mode: AttackMode::Targeted(target as u8),
            ..*spec
        };
        // Count per-source-class outcomes for this target.
        let per_class = evaluate_attack_per_class(sys, images, labels, &spec_t, cfg)?;
        for (i, (hit, count)) in per_class.into_iter().enumerate() {
            hits[i][target] = hit;
            if target == 0 {
                counts[i] = count;
            } else if counts[i] != count {
                return Err(Error::Training(format!(
                    "inconsistent clean pass across targets for class {}",
                    i
                )));
            }
        }
    }

    let rates = (0..classes)
        .map(|i| {
            (0..classes)
                .map(|j| {
                    if i == j {
                        f64::NAN
                    } else if counts[i] == 0 {
                        0.0
                    } else {
                        hits[i][j] as f64 / counts[i] as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(SuccessMatrix { rates })
}

/// Helper for the success matrix: per source class, (samples pushed into the
/// target, cleanly-correct samples).
fn evaluate_attack_per_class(
    sys: &SemanticSystem,
    images: &Matrix,
    labels: &[u8],
    spec: &AttackSpec,
    cfg: &ChannelConfig,
) -> Result<Vec<(usize, usize)>> {
    let target = match spec.mode {
        AttackMode::Targeted(t) => t,
        AttackMode::NonTargeted => {
            return Err(Error::Config("per-class evaluation requires a target".into()));
        }
    };
    let classes = sys.num_classes();
    let noise_var = cfg.noise_variance();
    let power = channel::pnr_to_power(spec.pnr_db, cfg.snr_db);
    let mut noise_rng = rng::stream(spec.seed, "attack-noise", 0, 0);
    let mut jam_rng = rng::stream(spec.seed, "attack-jam", 0, 0);
    let mut fallback_rng = rng::stream(spec.seed, "attack-fallback", 0, 0);
    let mut out = vec![(0usize, 0usize); classes];

    const BATCH: usize = 250;
    let mut row = 0;
    while row < images.rows() {
        let end = (row + BATCH).min(images.rows());
        let idx: Vec<u32> = (row as u32..end as u32).collect();
        let x = images.gather_rows(&idx)?;
        let batch_labels = &labels[row..end];
        let noise = channel::noise_matrix(x.rows(), sys.n_uses(), noise_var, &mut noise_rng);

        let clean_trace = transmit_trace(sys, &x, &noise)?;
        let clean_preds = predict(&sys.classifier.forward(clean_trace.reconstruction())?);

        let recon = match spec.domain {
            AttackDomain::Image => {
                let x_adv = craft_image(sys, &x, batch_labels, spec.mode, spec.epsilon, &noise)?;
                transmit_trace(sys, &x_adv, &noise)?.decoder.output().clone()
            }
            AttackDomain::Wireless => {
                let craft_on = if spec.craft_pre_noise {
                    &clean_trace.normalized
                } else {
                    &clean_trace.received
                };
                let (delta, _) = craft_wireless(
                    sys,
                    craft_on,
                    batch_labels,
                    spec.mode,
                    power,
                    &mut fallback_rng,
                )?;
                let mut received = clean_trace.received.clone();
                received.add_assign(&delta)?;
                sys.decoder.forward(&received)?
            }
            AttackDomain::GaussianJam => {
                let jam = gaussian_jam(x.rows(), sys.n_uses(), power, &mut jam_rng);
                let mut received = clean_trace.received.clone();
                received.add_assign(&jam)?;
                sys.decoder.forward(&received)?
            }
            AttackDomain::MultiDomain => {
                let x_adv =
                    craft_image(sys, &x, batch_labels, spec.mode, spec.image_epsilon, &noise)?;
                let trace = transmit_trace(sys, &x_adv, &noise)?;
                let craft_on = if spec.craft_pre_noise { &trace.normalized } else { &trace.received };
                let (delta, _) = craft_wireless(
                    sys,
                    craft_on,
                    batch_labels,
                    spec.mode,
                    power,
                    &mut fallback_rng,
                )?;
                let mut received = trace.received.clone();
                received.add_assign(&delta)?;
                sys.decoder.forward(&received)?
            }
        };
        let adv_preds = predict(&sys.classifier.forward(&recon)?);

        for i in 0..batch_labels.len() {
            let label = batch_labels[i] as usize;
            if clean_preds[i] != batch_labels[i] {
                continue;
            }
            // The denominator counts every cleanly-correct sample of the
            // class; hits on the diagonal would be meaningless and the
            // matrix leaves it NaN anyway.
            out[label].1 += 1;
            if batch_labels[i] != target {
                out[label].0 += usize::from(adv_preds[i] == target);
            }
        }
        row = end;
    }
    Ok(out)
}

/// Summary statistics of a targeted success matrix.
///
/// - `avg_over_non_target`: for each source class, the best success any
///   target achieves against it, averaged over source classes.
/// - `avg_over_target`: for each target class, the best success it achieves
///   over source classes, averaged over target classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetedAggregates {
    pub avg_over_non_target: f64,
    pub avg_over_target: f64,
}

pub fn targeted_aggregates(matrix: &SuccessMatrix) -> Result<TargetedAggregates> {
    let n = matrix.rates.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "success matrix needs at least 2 classes, got {}",
            n
        )));
    }
    for (i, row) in matrix.rates.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Config(format!(
                "success matrix is not square: row {} has {} of {} entries",
                i,
                row.len(),
                n
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if i == j {
                continue;
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "success matrix entry [{}][{}] = {} outside [0, 1]",
                    i, j, v
                )));
            }
        }
    }

    let row_max = |i: usize| -> f64 {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| matrix.rates[i][j])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let col_max = |j: usize| -> f64 {
        (0..n)
            .filter(|&i| i != j)
            .map(|i| matrix.rates[i][j])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(TargetedAggregates {
        avg_over_non_target: (0..n).map(row_max).sum::<f64>() / n as f64,
        avg_over_target: (0..n).map(col_max).sum::<f64>() / n as f64,
    })
}
