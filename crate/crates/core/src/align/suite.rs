use rand::Rng;

use super::autoencoder::{autoencoder_specs, AutoencoderConfig};
use super::discriminator::discriminator_spec;
use crate::error::Result;
use crate::nn::{gradient_check, GradCheckReport, LossKind, NetworkSpec, NetworkWeights};
use crate::seed::SeedLineage;

pub const GRADCHECK_EPS: f64 = 1e-5;

/// Every network shape the pipeline trains: the 800- and 600-input
/// autoencoder halves and the discriminator.
pub fn architectures(cfg: &AutoencoderConfig) -> Result<Vec<(&'static str, NetworkSpec)>> {
    let (e800, d800) = autoencoder_specs(800, cfg)?;
    let (e600, d600) = autoencoder_specs(600, cfg)?;
    Ok(vec![
        ("encoder_800", e800),
        ("decoder_800", d800),
        ("encoder_600", e600),
        ("decoder_600", d600),
        ("discriminator", discriminator_spec(cfg.latent_len)?),
    ])
}

/// Gradient check of every architecture at fresh Glorot weights and random
/// inputs and targets drawn from `seed`.
pub fn gradcheck_suite(cfg: &AutoencoderConfig, seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let lineage = SeedLineage::root(seed).child("gradcheck");
    architectures(cfg)?
        .into_iter()
        .map(|(name, spec)| {
            let mut rng = lineage.child(name).rng();
            let w = NetworkWeights::init(&spec, &mut rng);
            let x: Vec<f64> = (0..spec.input_len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..spec.output_len).map(|_| rng.random_range(0.0..1.0)).collect();
            Ok((name, gradient_check(&spec, &w, &x, &t, LossKind::Mse, GRADCHECK_EPS)?))
        })
        .collect()
}
