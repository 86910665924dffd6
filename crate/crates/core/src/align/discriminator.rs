//! Domain discriminator: three relu layers of 100 units and one tanh unit.
//! The raw output `a` in (-1, 1) is mapped to a score `(1 + a) / 2` in
//! (0, 1) and compared with the domain label by squared error.

use rand::Rng;

use crate::error::Result;
use crate::nn::{Activation, Gradients, LayerSpec, Network, NetworkSpec};

pub const DISC_WIDTH: usize = 100;
pub const DISC_HIDDEN_LAYERS: usize = 3;

pub fn discriminator_spec(latent_len: usize) -> Result<NetworkSpec> {
    let mut layers = Vec::with_capacity(DISC_HIDDEN_LAYERS + 1);
    let mut width = latent_len;
    for _ in 0..DISC_HIDDEN_LAYERS {
        layers.push(LayerSpec::dense(width, DISC_WIDTH, Activation::Relu));
        width = DISC_WIDTH;
    }
    layers.push(LayerSpec::dense(width, 1, Activation::Tanh));
    NetworkSpec::new(layers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub net: Network,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(latent_len: usize, rng: &mut R) -> Result<Self> {
        Ok(Discriminator {
            net: Network::init(discriminator_spec(latent_len)?, rng)?,
        })
    }

    /// Mapped score in (0, 1); close to 1 means "source".
    pub fn score(&self, latent: &[f64]) -> Result<f64> {
        Ok((1.0 + self.net.predict(latent)?[0]) / 2.0)
    }

    /// Squared error of the score against `label`, with parameter gradients
    /// and the gradient with respect to `latent`.
    pub fn loss_grad(&self, latent: &[f64], label: f64) -> Result<(f64, Gradients)> {
        let (out, cache) = self.net.forward(latent)?;
        let score = (1.0 + out[0]) / 2.0;
        let diff = score - label;
        // d/da (score - label)^2 = 2 diff * 1/2
        let grads = self.net.backward_from_output(&cache, &[diff])?;
        Ok((diff * diff, grads))
    }

    pub fn loss(&self, latent: &[f64], label: f64) -> Result<f64> {
        let d = self.score(latent)? - label;
        Ok(d * d)
    }
}
