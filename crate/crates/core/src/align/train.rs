//! Training procedures: autoencoder pretraining, discriminator visits, the
//! adversarial encoder round and the loop that alternates them.
//!
//! Domain labels follow the honest convention source = 1, target = 0. The
//! adversarial round trains the encoders against the exchanged labels.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autoencoder::Autoencoder;
use super::discriminator::Discriminator;
use super::mmd::mmd;
use crate::error::{Error, Result};
use crate::nn::{Gradients, LossKind, Sgd, SgdConfig};

pub const SOURCE_LABEL: f64 = 1.0;
pub const TARGET_LABEL: f64 = 0.0;

/// Which encoders the adversarial round updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    /// Both encoders, each against its exchanged label.
    #[default]
    Both,
    /// Only the target encoder; the source latent space acts as an anchor.
    TargetOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentSchedule {
    pub pretrain_epochs: usize,
    pub disc_low_threshold: f64,
    pub disc_high_threshold: f64,
    pub max_adversarial_iterations: usize,
    /// Cap on pretraining, discriminator and adversarial epochs together.
    pub total_epoch_budget: usize,
    /// Cap on epochs of a single discriminator visit.
    pub disc_max_epochs: usize,
    /// Encoder epochs per adversarial round.
    pub adversarial_epochs: usize,
    pub flip: FlipMode,
    /// Weight of a reconstruction term kept during adversarial rounds.
    pub recon_weight: f64,
    pub recon_loss: LossKind,
    pub pretrain_sgd: SgdConfig,
    pub disc_sgd: SgdConfig,
    pub encoder_sgd: SgdConfig,
}

impl Default for AlignmentSchedule {
    fn default() -> Self {
        AlignmentSchedule {
            pretrain_epochs: 1000,
            disc_low_threshold: 0.01,
            disc_high_threshold: 0.5,
            max_adversarial_iterations: 20,
            total_epoch_budget: 1200,
            disc_max_epochs: 20,
            adversarial_epochs: 5,
            flip: FlipMode::Both,
            recon_weight: 0.0,
            recon_loss: LossKind::Mse,
            pretrain_sgd: SgdConfig::default(),
            disc_sgd: SgdConfig::default(),
            encoder_sgd: SgdConfig {
                learning_rate: 0.001,
                momentum: 0.9,
            },
        }
    }
}

impl AlignmentSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.disc_low_threshold
            && self.disc_low_threshold < self.disc_high_threshold
            && self.disc_high_threshold < 1.0)
        {
            return Err(Error::Config(format!(
                "discriminator thresholds must satisfy 0 < low < high < 1, got {} and {}",
                self.disc_low_threshold, self.disc_high_threshold
            )));
        }
        if self.total_epoch_budget == 0 || self.disc_max_epochs == 0 || self.adversarial_epochs == 0 {
            return Err(Error::Config("epoch budgets must be positive".into()));
        }
        if self.pretrain_epochs > self.total_epoch_budget {
            return Err(Error::Config(format!(
                "pretraining ({} epochs) exceeds the total budget of {}",
                self.pretrain_epochs, self.total_epoch_budget
            )));
        }
        if !(self.recon_weight >= 0.0 && self.recon_weight.is_finite()) {
            return Err(Error::Config(format!("reconstruction weight {} must be non-negative", self.recon_weight)));
        }
        for (name, c) in [("pretrain", self.pretrain_sgd), ("discriminator", self.disc_sgd), ("encoder", self.encoder_sgd)] {
            if !(c.learning_rate >= 0.0 && (0.0..1.0).contains(&c.momentum)) {
                return Err(Error::Config(format!("{name} optimiser needs lr >= 0 and momentum in [0, 1)")));
            }
        }
        Ok(())
    }
}

fn check_finite(loss: f64, iteration: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Diverged { iteration })
    }
}

/// Per-sample SGD on the reconstruction loss. Returns the mean loss of
/// every epoch.
pub fn pretrain_autoencoder<R: Rng + ?Sized>(
    ae: &mut Autoencoder,
    data: &[Vec<f64>],
    epochs: usize,
    loss: LossKind,
    sgd: SgdConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(Error::InvalidInput(format!("pretraining needs at least 2 instances, got {}", data.len())));
    }
    if let Some(x) = data.iter().find(|x| x.len() != ae.input_len()) {
        return Err(Error::shape(ae.input_len(), x.len(), "pretraining instance"));
    }
    let mut enc_opt = Sgd::new(sgd, &ae.encoder.spec);
    let mut dec_opt = Sgd::new(sgd, &ae.decoder.spec);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for &i in &order {
            let (g, enc_cache) = ae.reconstruction_grad(&data[i], loss)?;
            total += check_finite(g.loss, epoch)?;
            let enc_grads = ae.encoder.backward_from_output(&enc_cache, &g.latent_grad)?;
            enc_opt.step(&mut ae.encoder.weights, &enc_grads).map_err(|_| Error::Diverged { iteration: epoch })?;
            dec_opt.step(&mut ae.decoder.weights, &g.decoder).map_err(|_| Error::Diverged { iteration: epoch })?;
        }
        trace.push(check_finite(total / data.len() as f64, epoch)?);
    }
    Ok(trace)
}

/// Mean squared error of the discriminator over both sides with the given
/// labels.
pub fn discriminator_loss(
    disc: &Discriminator,
    source: &[Vec<f64>],
    target: &[Vec<f64>],
    source_label: f64,
    target_label: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for z in source {
        total += disc.loss(z, source_label)?;
    }
    for z in target {
        total += disc.loss(z, target_label)?;
    }
    Ok(total / (source.len() + target.len()) as f64)
}

/// Loss the encoders minimise: the discriminator loss under exchanged labels.
pub fn adversarial_loss(disc: &Discriminator, source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    discriminator_loss(disc, source, target, TARGET_LABEL, SOURCE_LABEL)
}

/// Sum of the per-side mean squared errors under honest labels. A
/// discriminator that outputs 0.5 everywhere scores exactly 0.5.
pub fn honest_loss(disc: &Discriminator, source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    let side = |zs: &[Vec<f64>], label: f64| -> Result<f64> {
        let mut t = 0.0;
        for z in zs {
            t += disc.loss(z, label)?;
        }
        Ok(t / zs.len() as f64)
    };
    Ok(side(source, SOURCE_LABEL)? + side(target, TARGET_LABEL)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorOutcome {
    pub final_loss: f64,
    pub epochs: usize,
    pub reached_threshold: bool,
}

/// Warm-started per-sample SGD on honest labels until the epoch mean loss
/// is at most `low_threshold` or `max_epochs` have run.
pub fn train_discriminator<R: Rng + ?Sized>(
    disc: &mut Discriminator,
    source: &[Vec<f64>],
    target: &[Vec<f64>],
    low_threshold: f64,
    max_epochs: usize,
    sgd: SgdConfig,
    rng: &mut R,
) -> Result<DiscriminatorOutcome> {
    if source.len() < 2 || target.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "discriminator training needs at least 2 latents per side, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let mut opt = Sgd::new(sgd, &disc.net.spec);
    let mut samples: Vec<(&[f64], f64)> = source
        .iter()
        .map(|z| (z.as_slice(), SOURCE_LABEL))
        .chain(target.iter().map(|z| (z.as_slice(), TARGET_LABEL)))
        .collect();
    let mut last = discriminator_loss(disc, source, target, SOURCE_LABEL, TARGET_LABEL)?;
    let mut epochs = 0;
    while last > low_threshold && epochs < max_epochs {
        samples.shuffle(rng);
        for &(z, label) in &samples {
            let (l, g) = disc.loss_grad(z, label)?;
            check_finite(l, epochs)?;
            opt.step(&mut disc.net.weights, &g).map_err(|_| Error::Diverged { iteration: epochs })?;
        }
        epochs += 1;
        last = check_finite(discriminator_loss(disc, source, target, SOURCE_LABEL, TARGET_LABEL)?, epochs)?;
    }
    Ok(DiscriminatorOutcome {
        final_loss: last,
        epochs,
        reached_threshold: last <= low_threshold,
    })
}

/// Settings of one adversarial round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundConfig {
    pub epochs: usize,
    pub flip: FlipMode,
    pub recon_weight: f64,
    pub recon_loss: LossKind,
    pub sgd: SgdConfig,
}

impl RoundConfig {
    pub fn from_schedule(s: &AlignmentSchedule) -> Self {
        RoundConfig {
            epochs: s.adversarial_epochs,
            flip: s.flip,
            recon_weight: s.recon_weight,
            recon_loss: s.recon_loss,
            sgd: s.encoder_sgd,
        }
    }
}

struct Learner<'a> {
    ae: &'a mut Autoencoder,
    enc_opt: Sgd,
    dec_opt: Sgd,
}

impl Learner<'_> {
    /// One step on `x`: the discriminator loss against `label` through the
    /// latent plus the weighted reconstruction term.
    fn step(&mut self, disc: &Discriminator, x: &[f64], label: f64, cfg: &RoundConfig, epoch: usize) -> Result<f64> {
        let (latent, enc_cache) = self.ae.encoder.forward(x)?;
        let (adv, d_grads) = disc.loss_grad(&latent, label)?;
        let mut latent_grad = d_grads.input;
        let mut total = adv;
        let mut dec_grads: Option<Gradients> = None;
        if cfg.recon_weight > 0.0 {
            let (out, dec_cache) = self.ae.decoder.forward(&latent)?;
            total += cfg.recon_weight * crate::nn::loss(cfg.recon_loss, &out, x)?;
            let d_out = crate::nn::loss_gradient(cfg.recon_loss, &out, x)?;
            let mut g = self.ae.decoder.backward_from_output(&dec_cache, &d_out)?;
            g.scale(cfg.recon_weight);
            for (a, b) in latent_grad.iter_mut().zip(&g.input) {
                *a += b;
            }
            dec_grads = Some(g);
        }
        check_finite(total, epoch)?;
        let enc_grads = self.ae.encoder.backward_from_output(&enc_cache, &latent_grad)?;
        self.enc_opt.step(&mut self.ae.encoder.weights, &enc_grads).map_err(|_| Error::Diverged { iteration: epoch })?;
        if let Some(g) = dec_grads {
            self.dec_opt.step(&mut self.ae.decoder.weights, &g).map_err(|_| Error::Diverged { iteration: epoch })?;
        }
        Ok(total)
    }
}

/// Trains the encoders to fool the frozen discriminator: source instances
/// are pushed towards the target label and target instances towards the
/// source label. Returns the mean step loss of the last epoch.
pub fn adversarial_round<R: Rng + ?Sized>(
    source_ae: &mut Autoencoder,
    target_ae: &mut Autoencoder,
    disc: &Discriminator,
    source_batch: &[Vec<f64>],
    target_batch: &[Vec<f64>],
    cfg: &RoundConfig,
    rng: &mut R,
) -> Result<f64> {
    if source_batch.is_empty() || target_batch.is_empty() {
        return Err(Error::InvalidInput("adversarial round needs instances on both sides".into()));
    }
    let train_source = cfg.flip == FlipMode::Both;
    let mut src = Learner {
        enc_opt: Sgd::new(cfg.sgd, &source_ae.encoder.spec),
        dec_opt: Sgd::new(cfg.sgd, &source_ae.decoder.spec),
        ae: source_ae,
    };
    let mut tgt = Learner {
        enc_opt: Sgd::new(cfg.sgd, &target_ae.encoder.spec),
        dec_opt: Sgd::new(cfg.sgd, &target_ae.decoder.spec),
        ae: target_ae,
    };
    let mut order: Vec<(bool, usize)> = (0..target_batch.len()).map(|i| (false, i)).collect();
    if train_source {
        order.extend((0..source_batch.len()).map(|i| (true, i)));
    }
    let mut last = 0.0;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for &(is_source, i) in &order {
            total += if is_source {
                src.step(disc, &source_batch[i], TARGET_LABEL, cfg, epoch)?
            } else {
                tgt.step(disc, &target_batch[i], SOURCE_LABEL, cfg, epoch)?
            };
        }
        last = total / order.len() as f64;
    }
    Ok(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Honest discriminator loss reached the high threshold.
    Threshold,
    /// Iteration cap reached first.
    Cap,
    /// Total epoch budget exhausted first.
    Budget,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Threshold => "threshold",
            StopReason::Cap => "cap",
            StopReason::Budget => "budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Honest discriminator loss on this iteration's batch after the round.
    pub disc_loss: f64,
    /// Discriminator loss at the end of this iteration's training visit.
    pub disc_train_loss: f64,
    pub disc_epochs: usize,
    /// MMD between all labelled source and target latents after the round.
    pub mmd: f64,
    /// Epochs consumed so far, pretraining included.
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub mmd_before: f64,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub epochs: usize,
}

impl AlignmentReport {
    pub fn disc_loss_trace(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.disc_loss).collect()
    }

    pub fn mmd_trace(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.mmd).collect()
    }

    pub fn mmd_after(&self) -> f64 {
        self.iterations.last().map_or(self.mmd_before, |r| r.mmd)
    }

    /// CSV with columns `iteration,disc_loss,mmd,epochs`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,disc_loss,mmd,epochs\n");
        for r in &self.iterations {
            s.push_str(&format!("{},{},{},{}\n", r.iteration, r.disc_loss, r.mmd, r.epochs));
        }
        s
    }
}

/// Labelled training instances of one side grouped by class. Replications
/// of a class are listed in user order so cycling through them cycles users.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBatches {
    pub classes: Vec<String>,
    pub instances: Vec<Vec<Vec<f64>>>,
}

impl ClassBatches {
    /// Groups `(class, features)` pairs, keeping first-seen order within
    /// each class and sorting classes by id.
    pub fn group(items: impl IntoIterator<Item = (String, Vec<f64>)>) -> Self {
        let mut map: std::collections::BTreeMap<String, Vec<Vec<f64>>> = Default::default();
        for (c, x) in items {
            map.entry(c).or_default().push(x);
        }
        let (classes, instances) = map.into_iter().unzip();
        ClassBatches { classes, instances }
    }

    /// One replication per class: replication `iteration mod n` of each.
    pub fn batch(&self, iteration: usize) -> Vec<Vec<f64>> {
        self.instances.iter().map(|reps| reps[iteration % reps.len()].clone()).collect()
    }

    pub fn all(&self) -> Vec<Vec<f64>> {
        self.instances.iter().flatten().cloned().collect()
    }
}

fn encode_all(ae: &Autoencoder, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    xs.iter().map(|x| ae.encode(x)).collect()
}

/// Alternates discriminator visits and adversarial rounds until the honest
/// discriminator loss on the latest batch reaches the high threshold.
/// `epochs_used` is what pretraining already consumed.
#[allow(clippy::too_many_arguments)]
pub fn align<R: Rng + ?Sized>(
    source_ae: &mut Autoencoder,
    target_ae: &mut Autoencoder,
    disc: &mut Discriminator,
    source: &ClassBatches,
    target: &ClassBatches,
    schedule: &AlignmentSchedule,
    epochs_used: usize,
    rng: &mut R,
) -> Result<AlignmentReport> {
    schedule.validate()?;
    if source.classes != target.classes {
        return Err(Error::InvalidInput(format!(
            "labelled classes differ between sides: {:?} vs {:?}",
            source.classes, target.classes
        )));
    }
    if source.classes.is_empty() {
        return Err(Error::InvalidInput("no labelled classes to align on".into()));
    }
    let src_all = source.all();
    let tgt_all = target.all();
    let mmd_before = mmd(&encode_all(source_ae, &src_all)?, &encode_all(target_ae, &tgt_all)?, None)?;
    let round = RoundConfig::from_schedule(schedule);
    let mut epochs = epochs_used;
    let mut iterations = Vec::new();
    let mut stop_reason = StopReason::Cap;
    for it in 0..schedule.max_adversarial_iterations {
        let remaining = schedule.total_epoch_budget.saturating_sub(epochs);
        if remaining <= round.epochs {
            stop_reason = StopReason::Budget;
            break;
        }
        let src_batch = source.batch(it);
        let tgt_batch = target.batch(it);
        let outcome = train_discriminator(
            disc,
            &encode_all(source_ae, &src_batch)?,
            &encode_all(target_ae, &tgt_batch)?,
            schedule.disc_low_threshold,
            schedule.disc_max_epochs.min(remaining - round.epochs),
            schedule.disc_sgd,
            rng,
        )?;
        adversarial_round(source_ae, target_ae, disc, &src_batch, &tgt_batch, &round, rng)?;
        epochs += outcome.epochs + round.epochs;
        let honest = honest_loss(disc, &encode_all(source_ae, &src_batch)?, &encode_all(target_ae, &tgt_batch)?)?;
        let m = mmd(&encode_all(source_ae, &src_all)?, &encode_all(target_ae, &tgt_all)?, None)?;
        iterations.push(IterationRecord {
            iteration: it,
            disc_loss: honest,
            disc_train_loss: outcome.final_loss,
            disc_epochs: outcome.epochs,
            mmd: m,
            epochs,
        });
        if honest >= schedule.disc_high_threshold {
            stop_reason = StopReason::Threshold;
            break;
        }
    }
    Ok(AlignmentReport {
        mmd_before,
        iterations,
        stop_reason,
        epochs,
    })
}
