//! Nearest-exemplar recognition of unseen classes in the shared latent
//! space. Every source exemplar is kept as its own prototype and a query is
//! assigned to the class of the most cosine-similar exemplar.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;

/// Runs a frozen encoder on one feature vector.
pub fn encode(encoder: &Network, features: &[f64]) -> Result<Vec<f64>> {
    if features.len() != encoder.input_len() {
        return Err(Error::shape(encoder.input_len(), features.len(), "encoder input"));
    }
    encoder.predict(features)
}

/// Order-preserving batch version of [`encode`].
pub fn encode_batch(encoder: &Network, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    batch.par_iter().map(|x| encode(encoder, x)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape(u.len(), v.len(), "cosine operands"));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidInput("cosine of a zero vector is undefined".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Exemplar latents per class, classes in ascending id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrototypeSet {
    classes: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ClassPrototypeSet {
    pub fn classes(&self) -> impl Iterator<Item = (&String, &Vec<Vec<f64>>)> {
        self.classes.iter()
    }

    pub fn class_ids(&self) -> Vec<String> {
        self.classes.keys().cloned().collect()
    }

    pub fn get(&self, class: &str) -> Option<&[Vec<f64>]> {
        self.classes.get(class).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Encodes every exemplar. `expected` lists classes that must each receive
/// at least one exemplar.
pub fn build_prototypes(encoder: &Network, exemplars: &[(String, Vec<f64>)], expected: &[String]) -> Result<ClassPrototypeSet> {
    let latents: Vec<Vec<f64>> = exemplars.par_iter().map(|(_, x)| encode(encoder, x)).collect::<Result<_>>()?;
    let mut classes: BTreeMap<String, Vec<Vec<f64>>> = expected.iter().map(|c| (c.clone(), Vec::new())).collect();
    for ((c, _), z) in exemplars.iter().zip(latents) {
        classes.entry(c.clone()).or_default().push(z);
    }
    if let Some((c, _)) = classes.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::InvalidInput(format!("class {c} has no exemplars")));
    }
    if classes.is_empty() {
        return Err(Error::InvalidInput("no exemplars given".into()));
    }
    Ok(ClassPrototypeSet { classes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: String,
    pub score: f64,
    /// Best class other than `class`; absent with a single class.
    pub runner_up: Option<String>,
    /// `score` minus the runner-up's best score, or `score + 1` when there
    /// is no runner-up.
    pub margin: f64,
}

/// Class of the most similar exemplar. Equal scores go to the smallest
/// class id and then give a margin of zero.
pub fn classify(latent: &[f64], protos: &ClassPrototypeSet) -> Result<Prediction> {
    if protos.is_empty() {
        return Err(Error::InvalidInput("empty prototype set".into()));
    }
    if norm(latent) == 0.0 {
        return Err(Error::InvalidInput("cannot classify a zero latent".into()));
    }
    let mut best: Vec<(f64, &String)> = Vec::with_capacity(protos.classes.len());
    for (class, zs) in &protos.classes {
        let mut top = f64::NEG_INFINITY;
        for z in zs {
            top = top.max(cosine(latent, z)?);
        }
        best.push((top, class));
    }
    // stable sort keeps ascending class order among equal scores
    best.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (score, class) = best[0];
    Ok(Prediction {
        class: class.clone(),
        score,
        runner_up: best.get(1).map(|(_, c)| (*c).clone()),
        margin: best.get(1).map_or(score + 1.0, |(s, _)| score - s),
    })
}

/// One classified test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub true_class: String,
    pub pred_class: String,
    pub score: f64,
    pub margin: f64,
}

/// Writes `instance_id,true_class,pred_class,score,margin` rows.
pub fn write_predictions<W: Write>(out: W, records: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}

pub fn read_predictions<R: std::io::Read>(input: R) -> Result<Vec<PredictionRecord>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::{Activation, LayerParams, LayerSpec, NetworkSpec, NetworkWeights};

    fn basis(n: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        v
    }

    fn protos(items: Vec<(&str, Vec<f64>)>) -> ClassPrototypeSet {
        let mut classes: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
        for (c, v) in items {
            classes.entry(c.to_string()).or_default().push(v);
        }
        ClassPrototypeSet { classes }
    }

    #[test]
    fn cosine_values() {
        assert_eq!(cosine(&basis(3, 0), &basis(3, 1)).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let v = [0.3, -2.0, 7.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn hand_worked_classification() {
        let p = protos(vec![("A", basis(2, 0)), ("B", basis(2, 1))]);
        let pred = classify(&[0.9, 0.1], &p).unwrap();
        assert_eq!(pred.class, "A");
        assert_eq!(pred.runner_up.as_deref(), Some("B"));
        let exact = classify(&basis(2, 1), &p).unwrap();
        assert_eq!((exact.class.as_str(), exact.score), ("B", 1.0));
        assert!(classify(&[0.0, 0.0], &p).is_err());
    }

    #[test]
    fn orthonormal_prototypes_have_unit_margin() {
        let p = protos((0..5).map(|k| (["a", "b", "c", "d", "e"][k], basis(5, k))).collect());
        for (k, c) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            let pred = classify(&basis(5, k), &p).unwrap();
            assert_eq!((pred.class.as_str(), pred.score, pred.margin), (*c, 1.0, 1.0));
        }
    }

    #[test]
    fn ties_go_to_the_smallest_class_with_zero_margin() {
        let p = protos(vec![("z", vec![1.0, 0.0]), ("m", vec![0.0, 1.0])]);
        let pred = classify(&[1.0, 1.0], &p).unwrap();
        assert_eq!((pred.class.as_str(), pred.margin), ("m", 0.0));
    }

    #[test]
    fn prototypes_keep_every_exemplar() {
        let spec = NetworkSpec::new(vec![LayerSpec::dense(2, 2, Activation::Identity)]).unwrap();
        let w = NetworkWeights::from_layers(vec![LayerParams { weights: vec![1.0, 0.0, 0.0, 1.0], bias: vec![0.0; 2] }]);
        let enc = Network::new(spec, w).unwrap();
        let ex = vec![("b".to_string(), vec![1.0, 2.0]), ("a".to_string(), vec![3.0, 4.0]), ("b".to_string(), vec![1.0, 2.0])];
        let p = build_prototypes(&enc, &ex, &["a".into(), "b".into()]).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.get("b").unwrap(), &[vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(encode(&enc, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        match build_prototypes(&enc, &ex, &["a".into(), "b".into(), "c".into()]) {
            Err(Error::InvalidInput(m)) => assert!(m.contains("class c")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(encode(&enc, &[1.0]).is_err());
    }

    #[test]
    fn batch_encoding_preserves_order() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let spec = NetworkSpec::new(vec![LayerSpec::dense(8, 4, Activation::Tanh)]).unwrap();
        let enc = Network::init(spec, &mut r).unwrap();
        let xs: Vec<Vec<f64>> = (0..29).map(|i| (0..8).map(|j| ((i * 8 + j) as f64).sin()).collect()).collect();
        let batch = encode_batch(&enc, &xs).unwrap();
        for (x, z) in xs.iter().zip(&batch) {
            assert_eq!(&encode(&enc, x).unwrap(), z);
        }
    }

    #[test]
    fn prediction_csv_roundtrip() {
        let recs = vec![PredictionRecord { instance_id: "i1".into(), true_class: "a".into(), pred_class: "b".into(), score: 0.25, margin: 0.1 }];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &recs).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("instance_id,true_class,pred_class,score,margin\n"));
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), recs);
    }

    proptest! {
        #[test]
        fn scaling_the_query_keeps_the_prediction(
            q in prop::collection::vec(-1.0f64..1.0, 6),
            ps in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 4),
            c in 1e-3f64..1e3,
        ) {
            prop_assume!(norm(&q) > 1e-6 && ps.iter().all(|p| norm(p) > 1e-6));
            let p = protos(ps.iter().enumerate().map(|(i, v)| (["w", "x", "y", "z"][i], v.clone())).collect());
            let a = classify(&q, &p).unwrap();
            let scaled: Vec<f64> = q.iter().map(|v| v * c).collect();
            let b = classify(&scaled, &p).unwrap();
            prop_assert_eq!(&a.class, &b.class);
            prop_assert!((a.score - b.score).abs() < 1e-12);
            let brute = ps.iter().map(|v| {
                let dot: f64 = q.iter().zip(v).map(|(x, y)| x * y).sum();
                (dot / (norm(&q) * norm(v))).clamp(-1.0, 1.0)
            }).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(a.score, brute);
        }
    }
}
