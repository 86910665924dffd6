use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, BiasMode, ConvGeometry, Gradients, LayerSpec, LossKind, Network, NetworkSpec};

pub const LATENT_LEN: usize = 100;
pub const HIDDEN_LEN: usize = 200;

/// Layer-level choices shared by every autoencoder of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    pub hidden_len: usize,
    pub latent_len: usize,
    pub hidden_activation: Activation,
    pub latent_activation: Activation,
    pub encoder_bias: BiasMode,
    pub decoder_bias: BiasMode,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            hidden_len: HIDDEN_LEN,
            latent_len: LATENT_LEN,
            hidden_activation: Activation::Identity,
            latent_activation: Activation::Identity,
            encoder_bias: BiasMode::Shared,
            decoder_bias: BiasMode::PerPosition,
        }
    }
}

fn geometry(in_len: usize, out_len: usize) -> Result<ConvGeometry> {
    ConvGeometry::solve(in_len, out_len).ok_or_else(|| {
        Error::Config(format!("no convolution geometry maps {in_len} samples to {out_len}"))
    })
}

/// Encoder `input → hidden → latent` and the mirrored decoder
/// `latent → hidden → input` built from transposed convolutions.
pub fn autoencoder_specs(input_len: usize, cfg: &AutoencoderConfig) -> Result<(NetworkSpec, NetworkSpec)> {
    if input_len <= cfg.hidden_len || cfg.hidden_len <= cfg.latent_len || cfg.latent_len == 0 {
        return Err(Error::Config(format!(
            "autoencoder widths must shrink: input {input_len}, hidden {}, latent {}",
            cfg.hidden_len, cfg.latent_len
        )));
    }
    let g1 = geometry(input_len, cfg.hidden_len)?;
    let g2 = geometry(cfg.hidden_len, cfg.latent_len)?;
    let encoder = NetworkSpec::new(vec![
        LayerSpec::conv1d(input_len, g1, cfg.hidden_activation, cfg.encoder_bias)?,
        LayerSpec::conv1d(cfg.hidden_len, g2, cfg.latent_activation, cfg.encoder_bias)?,
    ])?;
    let decoder = NetworkSpec::new(vec![
        LayerSpec::transposed_conv1d(cfg.latent_len, cfg.hidden_len, g2, cfg.hidden_activation, cfg.decoder_bias)?,
        LayerSpec::transposed_conv1d(cfg.hidden_len, input_len, g1, Activation::Identity, cfg.decoder_bias)?,
    ])?;
    Ok((encoder, decoder))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: Network,
    pub decoder: Network,
}

/// Output of one reconstruction pass: the loss and gradients for both
/// halves. `latent_grad` is the loss gradient with respect to the latent.
pub struct ReconstructionGrad {
    pub loss: f64,
    pub latent: Vec<f64>,
    pub latent_grad: Vec<f64>,
    pub decoder: Gradients,
}

impl Autoencoder {
    pub fn new<R: Rng + ?Sized>(input_len: usize, cfg: &AutoencoderConfig, rng: &mut R) -> Result<Self> {
        let (enc, dec) = autoencoder_specs(input_len, cfg)?;
        Ok(Autoencoder {
            encoder: Network::init(enc, rng)?,
            decoder: Network::init(dec, rng)?,
        })
    }

    pub fn from_parts(encoder: Network, decoder: Network) -> Result<Self> {
        if encoder.output_len() != decoder.input_len() || decoder.output_len() != encoder.input_len() {
            return Err(Error::Config(format!(
                "decoder {}→{} does not mirror encoder {}→{}",
                decoder.input_len(),
                decoder.output_len(),
                encoder.input_len(),
                encoder.output_len()
            )));
        }
        Ok(Autoencoder { encoder, decoder })
    }

    pub fn input_len(&self) -> usize {
        self.encoder.input_len()
    }

    pub fn latent_len(&self) -> usize {
        self.encoder.output_len()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.predict(x)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.predict(&self.encode(x)?)
    }

    pub fn reconstruction_loss(&self, x: &[f64], loss: LossKind) -> Result<f64> {
        crate::nn::loss(loss, &self.reconstruct(x)?, x)
    }

    /// Reconstruction loss of `x` with decoder gradients and the gradient
    /// flowing back into the latent. Encoder gradients are left to the caller
    /// so that other loss terms on the latent can be added first.
    pub fn reconstruction_grad(&self, x: &[f64], loss: LossKind) -> Result<(ReconstructionGrad, crate::nn::ForwardCache)> {
        let (latent, enc_cache) = self.encoder.forward(x)?;
        let (out, dec_cache) = self.decoder.forward(&latent)?;
        let l = crate::nn::loss(loss, &out, x)?;
        let d_out = crate::nn::loss_gradient(loss, &out, x)?;
        let decoder = self.decoder.backward_from_output(&dec_cache, &d_out)?;
        Ok((
            ReconstructionGrad {
                loss: l,
                latent,
                latent_grad: decoder.input.clone(),
                decoder,
            },
            enc_cache,
        ))
    }
}
