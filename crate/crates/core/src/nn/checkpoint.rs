//! JSON checkpoints.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same bits, so a save/load cycle is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{LayerParams, NetworkSpec, NetworkWeights};
use crate::error::{Error, Result};
use crate::seed::SeedLineage;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerBlock {
    index: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Document {
    format_version: u32,
    role: String,
    seed_lineage: SeedLineage,
    spec: NetworkSpec,
    layers: Vec<LayerBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub role: String,
    pub seed_lineage: SeedLineage,
    pub spec: NetworkSpec,
    pub weights: NetworkWeights,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let doc = Document {
            format_version: FORMAT_VERSION,
            role: self.role.clone(),
            seed_lineage: self.seed_lineage.clone(),
            spec: self.spec.clone(),
            layers: self
                .weights
                .layers()
                .iter()
                .enumerate()
                .map(|(index, l)| LayerBlock {
                    index,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        doc.spec.validate().map_err(|e| Error::Checkpoint(format!("embedded spec: {e}")))?;
        if doc.layers.len() != doc.spec.layers.len() {
            return Err(Error::Checkpoint(format!(
                "spec has {} layers but {} weight blocks are stored",
                doc.spec.layers.len(),
                doc.layers.len()
            )));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (i, (block, spec)) in doc.layers.into_iter().zip(&doc.spec.layers).enumerate() {
            if block.index != i {
                return Err(Error::Checkpoint(format!("layer block {i} is labelled {}", block.index)));
            }
            if block.weights.len() != spec.weight_len() || block.bias.len() != spec.bias_len() {
                return Err(Error::Checkpoint(format!(
                    "layer {i}: expected {} weights and {} biases, found {} and {}",
                    spec.weight_len(),
                    spec.bias_len(),
                    block.weights.len(),
                    block.bias.len()
                )));
            }
            layers.push(LayerParams {
                weights: block.weights,
                bias: block.bias,
            });
        }
        Ok(Checkpoint {
            role: doc.role,
            seed_lineage: doc.seed_lineage,
            spec: doc.spec,
            weights: NetworkWeights::from_layers(layers),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn save_weights(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    role: &str,
    lineage: &SeedLineage,
    path: &Path,
) -> Result<()> {
    weights.check_shapes(spec)?;
    Checkpoint {
        role: role.to_string(),
        seed_lineage: lineage.clone(),
        spec: spec.clone(),
        weights: weights.clone(),
    }
    .save(path)
}

pub fn load_weights(path: &Path) -> Result<(NetworkSpec, NetworkWeights)> {
    let c = Checkpoint::load(path)?;
    Ok((c.spec, c.weights))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::layer::{Activation, BiasMode, ConvGeometry, LayerSpec};
    use crate::nn::network::predict;

    fn sample() -> Checkpoint {
        let g = ConvGeometry::solve(40, 10).unwrap();
        let spec = NetworkSpec::new(vec![
            LayerSpec::conv1d(40, g, Activation::Tanh, BiasMode::Shared).unwrap(),
            LayerSpec::dense(10, 3, Activation::Relu),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut weights = NetworkWeights::init(&spec, &mut rng);
        for l in weights.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        }
        Checkpoint {
            role: "source_encoder".into(),
            seed_lineage: SeedLineage::root(11).child("init"),
            spec,
            weights,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let c = sample();
        let text = c.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(
            predict(&c.spec, &c.weights, &x).unwrap(),
            predict(&back.spec, &back.weights, &x).unwrap()
        );
    }

    #[test]
    fn truncated_block_names_layer() {
        let c = sample();
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        v["layers"][1]["weights"].as_array_mut().unwrap().pop();
        let err = Checkpoint::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
    }

    #[test]
    fn wrong_version_and_garbage_are_rejected() {
        let c = sample();
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        v["format_version"] = 99.into();
        assert!(Checkpoint::from_json(&v.to_string()).is_err());
        assert!(Checkpoint::from_json("{\"format_version\": 1").is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.json");
        let c = sample();
        save_weights(&c.spec, &c.weights, &c.role, &c.seed_lineage, &path).unwrap();
        let (spec, weights) = load_weights(&path).unwrap();
        assert_eq!(spec, c.spec);
        assert_eq!(weights, c.weights);
    }
}
