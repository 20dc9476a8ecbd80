//! Classifier pretraining and the multi-round interactive training loop.
//!
//! Training alternates two phases over a fresh slice of data each round:
//!
//! 1. **Autoencoder phase** — encoder and decoder learn through the noisy
//!    channel against the combined loss, with the classifier frozen at its
//!    previous-round weights.
//! 2. **Classifier phase** — the classifier is retrained (warm-started) on
//!    the decoder's outputs for the round's held-out validation slice, so it
//!    tracks the statistics of reconstructed rather than clean images.
//!
//! The loss threshold comes from pretraining: the classifier's loss on clean
//! validation images, i.e. how well the task can be done with no channel in
//! the way.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelConfig};
use crate::data::{Dataset, RoundSampler, RoundScheme};
use crate::error::{Error, Result};
use crate::numerics::{
    adam_step, cce_loss, AdamConfig, AdamState, Matrix, Network, OutputGradient,
};
use crate::pipeline::{
    self, custom_loss, custom_loss_backward, transmit_trace, ArchConfig, CustomLossConfig,
    PenaltyKind, SemanticSystem,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub seed: u64,
    pub snr_db: f64,
    /// Channel uses per image (latent width).
    pub n_uses: usize,
    /// Interactive rounds of autoencoder + classifier training.
    pub rounds: usize,
    /// Autoencoder epochs per round over the round's training slice.
    pub ae_epochs: usize,
    /// Classifier retraining epochs per round over reconstructed validation
    /// data.
    pub classifier_epochs: usize,
    /// Clean-data classifier epochs before round 1.
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the classifier penalty in the combined loss.
    pub penalty_weight: f64,
    pub penalty: PenaltyKind,
    /// When false, the classifier stays at its pretrained weights for the
    /// whole run (the non-interactive baseline).
    pub retrain_classifier: bool,
    pub scheme: RoundScheme,
    /// Held-out fraction of each round's slice (also the pretraining split).
    pub val_fraction: f64,
    /// Test samples used for the per-round log entries (0 = all).
    pub eval_samples: usize,
    pub arch: ArchConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            seed: 0,
            snr_db: 10.0,
            n_uses: 40,
            rounds: 5,
            ae_epochs: 10,
            classifier_epochs: 5,
            pretrain_epochs: 4,
            batch_size: 64,
            learning_rate: 1e-3,
            penalty_weight: 0.2,
            penalty: PenaltyKind::Hinge,
            retrain_classifier: true,
            scheme: RoundScheme::Disjoint,
            val_fraction: 0.1,
            eval_samples: 2000,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.ae_epochs == 0 || self.classifier_epochs == 0 || self.pretrain_epochs == 0 {
            return Err(Error::Config("epoch counts must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.penalty_weight < 0.0 {
            return Err(Error::Config(format!(
                "penalty_weight must be nonnegative, got {}",
                self.penalty_weight
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction {} outside [0, 1)",
                self.val_fraction
            )));
        }
        if self.n_uses == 0 {
            return Err(Error::Config("n_uses must be positive".into()));
        }
        Ok(())
    }

    pub fn channel(&self) -> ChannelConfig {
        ChannelConfig {
            snr_db: self.snr_db,
            n_uses: self.n_uses,
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    fn loss(&self, threshold: f64) -> CustomLossConfig {
        CustomLossConfig {
            weight: self.penalty_weight,
            threshold,
            penalty: self.penalty,
        }
    }

    fn check_data(&self, data: &Dataset, what: &str) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Config(format!("{} set is empty", what)));
        }
        if data.images.cols() != self.arch.input_dim {
            return Err(Error::Config(format!(
                "{} images have {} pixels but the architecture expects {}",
                what,
                data.images.cols(),
                self.arch.input_dim
            )));
        }
        if let Some(&label) = data.labels.iter().find(|&&l| l as usize >= self.arch.num_classes) {
            return Err(Error::LabelOutOfRange {
                label: label as usize,
                num_classes: self.arch.num_classes,
            });
        }
        Ok(())
    }
}

/// One row of the per-round training log.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    /// 1-based round number.
    pub round: usize,
    /// Mean combined loss over the round's final autoencoder epoch.
    pub train_loss: f64,
    /// Classifier loss on the round's clean validation images after any
    /// retraining; comparable to the pretraining threshold.
    pub clean_cce: f64,
    pub test_mse: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundLog {
    pub rows: Vec<RoundRow>,
}

impl RoundLog {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["round", "train_loss", "clean_cce", "test_mse", "test_accuracy"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for row in &self.rows {
            wtr.write_record([
                row.round.to_string(),
                row.train_loss.to_string(),
                row.clean_cce.to_string(),
                row.test_mse.to_string(),
                row.test_accuracy.to_string(),
            ])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A trained system plus its run record.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub system: SemanticSystem,
    pub log: RoundLog,
    /// Clean-input classifier loss used as the penalty threshold.
    pub threshold: f64,
}

/// Trains the task classifier on clean images and measures the loss
/// threshold on a held-out split.
///
/// Returns the classifier and the threshold. Fails if, after the configured
/// epochs, the training loss is still no better than chance (`ln(classes)`),
/// which would make the threshold meaningless.
pub fn pretrain_classifier(train: &Dataset, cfg: &TrainingConfig) -> Result<(Network, f64)> {
    cfg.validate()?;
    cfg.check_data(train, "pretraining")?;

    let mut order: Vec<u32> = (0..train.len() as u32).collect();
    rand::seq::SliceRandom::shuffle(
        order.as_mut_slice(),
        &mut rng::stream(cfg.seed, "pretrain-split", 0, 0),
    );
    let n_val = ((train.len() as f64) * cfg.val_fraction).round() as usize;
    let n_val = n_val.clamp(1, train.len() - 1);
    let (train_idx, val_idx) = order.split_at(train.len() - n_val);

    let mut classifier = cfg
        .arch
        .build_classifier(&mut rng::stream(cfg.seed, "pretrain-init", 0, 0))?;
    let mut state = AdamState::new(&classifier);
    let adam = cfg.adam();

    let mut epoch_mean = f64::INFINITY;
    for epoch in 0..cfg.pretrain_epochs {
        let mut order = train_idx.to_vec();
        rand::seq::SliceRandom::shuffle(
            order.as_mut_slice(),
            &mut rng::stream(cfg.seed, "pretrain-batches", epoch as u64, 0),
        );
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let (images, labels) = train.gather(batch)?;
            let trace = classifier.forward_trace(&images)?;
            let (loss, grad) = cce_loss(trace.output(), &labels)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "pretraining loss became non-finite in epoch {}",
                    epoch + 1
                )));
            }
            let bundle = classifier.backward(&trace, OutputGradient::Logits(grad))?;
            adam_step(&mut classifier, &bundle, &mut state, &adam)?;
            loss_sum += loss;
            batches += 1;
        }
        epoch_mean = loss_sum / batches as f64;
        log::debug!("pretrain epoch {}: mean cce {:.4}", epoch + 1, epoch_mean);
    }

    let chance = (cfg.arch.num_classes as f64).ln();
    if !(epoch_mean < chance) {
        return Err(Error::Training(format!(
            "classifier failed to beat chance after {} pretraining epochs \
             (loss {:.4} vs ln({}) = {:.4}); threshold would be meaningless",
            cfg.pretrain_epochs, epoch_mean, cfg.arch.num_classes, chance
        )));
    }

    let (val_images, val_labels) = train.gather(val_idx)?;
    let probs = classifier.forward(&val_images)?;
    let (threshold, _) = cce_loss(&probs, &val_labels)?;
    let hits = (0..probs.rows())
        .filter(|&r| {
            let row = probs.row(r);
            let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            best == val_labels[r] as usize
        })
        .count();
    log::info!(
        "pretrained classifier: val cce {:.4}, val accuracy {:.4} over {} samples",
        threshold,
        hits as f64 / probs.rows() as f64,
        val_labels.len()
    );
    Ok((classifier, threshold))
}

/// Autoencoder phase of one round: trains encoder and decoder on the round's
/// training slice against the combined loss, with the classifier frozen.
///
/// Returns the mean combined loss over the final epoch.
pub fn autoencoder_phase(
    sys: &mut SemanticSystem,
    data: &Dataset,
    sampler: &RoundSampler,
    round: usize,
    threshold: f64,
    cfg: &TrainingConfig,
) -> Result<f64> {
    let adam = cfg.adam();
    let loss_cfg = cfg.loss(threshold);
    let noise_var = cfg.channel().noise_variance();
    let mut enc_state = AdamState::new(&sys.encoder);
    let mut dec_state = AdamState::new(&sys.decoder);

    let mut epoch_mean = 0.0;
    let mut active_batches = 0usize;
    let mut total_batches = 0usize;
    let mut cce_sum = 0.0;
    for epoch in 0..cfg.ae_epochs {
        let mut noise_rng = rng::stream(cfg.seed, "ae-noise", round as u64, epoch as u64);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in sampler.batches(round, epoch, cfg.batch_size)? {
            let (images, labels) = data.gather(&batch)?;
            let noise =
                channel::noise_matrix(images.rows(), sys.n_uses(), noise_var, &mut noise_rng);
            let trace = transmit_trace(sys, &images, &noise)?;
            let cls_trace = sys.classifier.forward_trace(trace.reconstruction())?;
            let loss = custom_loss(
                trace.reconstruction(),
                &images,
                cls_trace.output(),
                &labels,
                &loss_cfg,
            )?;
            if loss.penalty_active {
                active_batches += 1;
            }
            total_batches += 1;
            cce_sum += loss.classifier_cce;
            if !loss.value.is_finite() {
                return Err(Error::Training(format!(
                    "combined loss became non-finite in round {} epoch {}",
                    round + 1,
                    epoch + 1
                )));
            }
            let grads = custom_loss_backward(sys, &trace, &cls_trace, &loss)?;
            adam_step(&mut sys.encoder, &grads.encoder, &mut enc_state, &adam)?;
            adam_step(&mut sys.decoder, &grads.decoder, &mut dec_state, &adam)?;
            loss_sum += loss.value;
            batches += 1;
        }
        epoch_mean = loss_sum / batches as f64;
        log::debug!(
            "round {} ae epoch {}: mean loss {:.5}",
            round + 1,
            epoch + 1,
            epoch_mean
        );
    }
    if total_batches > 0 {
        log::info!(
            "round {} penalty: active on {:.0}% of batches, mean batch cce {:.4} vs threshold {:.4}",
            round + 1,
            100.0 * active_batches as f64 / total_batches as f64,
            cce_sum / total_batches as f64,
            threshold
        );
    }
    Ok(epoch_mean)
}

/// Classifier phase of one round: retrains the (warm-started) classifier on
/// reconstructions of the round's held-out validation slice.
///
/// Returns the mean classifier loss over the final retraining epoch.
pub fn classifier_phase(
    sys: &mut SemanticSystem,
    data: &Dataset,
    sampler: &RoundSampler,
    round: usize,
    cfg: &TrainingConfig,
) -> Result<f64> {
    let adam = cfg.adam();
    let noise_var = cfg.channel().noise_variance();
    let val_idx = sampler.val_indices(round)?;

    // Decoder outputs for the validation slice under test-time conditions
    // (fresh channel noise), gathered once and reused across epochs.
    let mut recon_rows: Vec<Matrix> = Vec::new();
    let mut labels_all: Vec<u8> = Vec::new();
    let mut noise_rng = rng::stream(cfg.seed, "cls-data", round as u64, 0);
    for batch in val_idx.chunks(250) {
        let (images, labels) = data.gather(batch)?;
        let noise = channel::noise_matrix(images.rows(), sys.n_uses(), noise_var, &mut noise_rng);
        let trace = transmit_trace(sys, &images, &noise)?;
        recon_rows.push(trace.reconstruction().clone());
        labels_all.extend_from_slice(&labels);
    }
    let mut recon = Matrix::zeros(labels_all.len(), sys.input_dim());
    let mut at = 0;
    for block in &recon_rows {
        for r in 0..block.rows() {
            recon.row_mut(at).copy_from_slice(block.row(r));
            at += 1;
        }
    }

    let mut state = AdamState::new(&sys.classifier);
    let mut epoch_mean = 0.0;
    for epoch in 0..cfg.classifier_epochs {
        let mut order: Vec<u32> = (0..labels_all.len() as u32).collect();
        rand::seq::SliceRandom::shuffle(
            order.as_mut_slice(),
            &mut rng::stream(cfg.seed, "cls-batches", round as u64, epoch as u64),
        );
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let images = recon.gather_rows(batch)?;
            let labels: Vec<u8> = batch.iter().map(|&i| labels_all[i as usize]).collect();
            let trace = sys.classifier.forward_trace(&images)?;
            let (loss, grad) = cce_loss(trace.output(), &labels)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "classifier loss became non-finite in round {} epoch {}",
                    round + 1,
                    epoch + 1
                )));
            }
            let bundle = sys.classifier.backward(&trace, OutputGradient::Logits(grad))?;
            adam_step(&mut sys.classifier, &bundle, &mut state, &adam)?;
            loss_sum += loss;
            batches += 1;
        }
        epoch_mean = loss_sum / batches as f64;
        log::debug!(
            "round {} classifier epoch {}: mean cce {:.5}",
            round + 1,
            epoch + 1,
            epoch_mean
        );
    }
    Ok(epoch_mean)
}

/// Runs the full interactive loop: pretraining (unless a pretrained
/// classifier and threshold are supplied), then `rounds` alternations of the
/// autoencoder and classifier phases, logging metrics per round.
///
/// When `checkpoint_dir` is given, each round is saved under
/// `round-<k>/` and the final system at the directory root.
pub fn run_interactive(
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainingConfig,
    pretrained: Option<(Network, f64)>,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    cfg.check_data(train, "training")?;
    cfg.check_data(test, "test")?;

    let (classifier, threshold) = match pretrained {
        Some((net, threshold)) => {
            if net.in_dim() != cfg.arch.input_dim || net.out_dim() != cfg.arch.num_classes {
                return Err(Error::Config(format!(
                    "pretrained classifier is {}->{} but the architecture needs {}->{}",
                    net.in_dim(),
                    net.out_dim(),
                    cfg.arch.input_dim,
                    cfg.arch.num_classes
                )));
            }
            (net, threshold)
        }
        None => pretrain_classifier(train, cfg)?,
    };

    // Encoder/decoder initialization depends on the latent width but not on
    // the SNR or classifier mode, so systems across a sweep start from
    // common weights and differ only through the channel.
    let mut init_rng = rng::stream(cfg.seed, "system-init", cfg.n_uses as u64, 0);
    let encoder = cfg.arch.build_encoder(cfg.n_uses, &mut init_rng)?;
    let decoder = cfg.arch.build_decoder(cfg.n_uses, &mut init_rng)?;
    let mut sys = SemanticSystem::new(encoder, decoder, classifier)?;

    let sampler = RoundSampler::new(
        train.len(),
        cfg.rounds,
        cfg.scheme,
        cfg.val_fraction,
        cfg.seed,
    )?;

    // Fixed evaluation subset, reused every round.
    let eval_idx: Vec<u32> = if cfg.eval_samples == 0 || cfg.eval_samples >= test.len() {
        (0..test.len() as u32).collect()
    } else {
        let mut order: Vec<u32> = (0..test.len() as u32).collect();
        rand::seq::SliceRandom::shuffle(
            order.as_mut_slice(),
            &mut rng::stream(cfg.seed, "eval-subset", 0, 0),
        );
        order.truncate(cfg.eval_samples);
        order
    };
    let (eval_images, eval_labels) = test.gather(&eval_idx)?;
    let channel_cfg = cfg.channel();

    let mut log = RoundLog::default();
    for round in 0..cfg.rounds {
        let train_loss = autoencoder_phase(&mut sys, train, &sampler, round, threshold, cfg)?;
        if cfg.retrain_classifier {
            classifier_phase(&mut sys, train, &sampler, round, cfg)?;
        }

        // Clean-data classifier loss on this round's validation images.
        let (val_images, val_labels) = train.gather(sampler.val_indices(round)?)?;
        let probs = sys.classifier.forward(&val_images)?;
        let (clean_cce, _) = cce_loss(&probs, &val_labels)?;

        let mut eval_rng = rng::stream(cfg.seed, "eval-noise", round as u64, 0);
        let metrics = pipeline::evaluate(&sys, &eval_images, &eval_labels, &channel_cfg, &mut eval_rng)?;
        log.rows.push(RoundRow {
            round: round + 1,
            train_loss,
            clean_cce,
            test_mse: metrics.mse,
            test_accuracy: metrics.accuracy,
        });
        log::info!(
            "round {}/{}: loss {:.5}, clean cce {:.4}, test mse {:.5}, test acc {:.4}",
            round + 1,
            cfg.rounds,
            train_loss,
            clean_cce,
            metrics.mse,
            metrics.accuracy
        );

        if let Some(dir) = checkpoint_dir {
            let manifest = pipeline::CheckpointManifest {
                n_uses: cfg.n_uses,
                snr_db: cfg.snr_db,
                loss_weight: cfg.penalty_weight,
                loss_threshold: threshold,
                rounds_completed: round + 1,
                seed: cfg.seed,
            };
            pipeline::save_checkpoint(&sys, &manifest, &dir.join(format!("round-{}", round + 1)))?;
            if round + 1 == cfg.rounds {
                pipeline::save_checkpoint(&sys, &manifest, dir)?;
            }
        }
    }

    Ok(TrainOutcome {
        system: sys,
        log,
        threshold,
    })
}
