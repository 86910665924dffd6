use serde::{Deserialize, Serialize};

use super::network::{Gradients, NetworkSpec, NetworkWeights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
        }
    }
}

/// Stochastic gradient descent with classical momentum:
/// `v = momentum * v + g; w -= learning_rate * v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub config: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(config: SgdConfig, spec: &NetworkSpec) -> Self {
        Sgd {
            config,
            velocity: spec.layers.iter().map(|l| vec![0.0; l.weight_len() + l.bias_len()]).collect(),
        }
    }

    /// Applies one update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, weights: &mut NetworkWeights, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != self.velocity.len() {
            return Err(Error::shape(self.velocity.len(), grads.layers.len(), "gradient layers"));
        }
        for (i, g) in grads.layers.iter().enumerate() {
            if g.weights.len() + g.bias.len() != self.velocity[i].len() {
                return Err(Error::shape(self.velocity[i].len(), g.weights.len() + g.bias.len(), format!("gradient of layer {i}")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: i,
                    what: "gradient".into(),
                });
            }
        }
        let SgdConfig { learning_rate, momentum } = self.config;
        for ((params, g), v) in weights.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.velocity) {
            for ((w, gv), vv) in params.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *vv = momentum * *vv + gv;
                *w -= learning_rate * *vv;
            }
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        self.velocity.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x = 0.0));
    }
}
