use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, Normalization};
use super::report::{accuracy_table, emit_plots, AccuracyReport};
use super::split::{split_domains, AuditLog, UnlabeledDomain, SCORING_STAGE};
use crate::align::{align, pretrain_autoencoder, AlignmentReport, Autoencoder, ClassBatches, Discriminator};
use crate::error::{Error, Result};
use crate::features::{
    accel_displacement, movement_signature, normalize_pose, wifi_feature_matrix, FeatureMatrix, MinMax,
    DEFAULT_CANONICAL_FRAMES,
};
use crate::nn::{load_weights, save_weights, Network};
use crate::recognize::{build_prototypes, classify, encode, write_predictions, PredictionRecord};
use crate::seed::SeedLineage;
use crate::synth::{random_classes, synthesize, GestureDataset, Instance, Modality, Observation};

/// Feature matrix of one raw observation: `4 × 200` wrist tracks for video,
/// `3 × 200` coordinates for WiFi, `3 × 600` displacement for accelerometers.
pub fn extract_features(obs: &Observation) -> Result<FeatureMatrix> {
    match obs {
        Observation::Video(frames) => {
            Ok(movement_signature(&normalize_pose(frames)?, DEFAULT_CANONICAL_FRAMES)?.position)
        }
        Observation::Wifi(pairs) => wifi_feature_matrix(pairs),
        Observation::Accel(channels) => accel_displacement(channels),
    }
}

/// Flattened input length of a modality's feature matrix.
pub fn input_len(modality: Modality) -> usize {
    match modality {
        Modality::Video => 800,
        Modality::Wifi => 600,
        Modality::Accel => 1800,
    }
}

fn center_channels(m: &FeatureMatrix) -> FeatureMatrix {
    let mut out = m.clone();
    for c in 0..out.channels() {
        let row = out.row_mut(c);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

/// Normaliser fitted on one modality's training matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mode: Normalization,
    pub range: MinMax,
}

impl FeatureScaler {
    pub fn fit(mode: Normalization, train: &[&FeatureMatrix]) -> Result<Self> {
        let prepared: Vec<FeatureMatrix> = train.iter().map(|m| Self::pre(mode, m)).collect();
        let mut range = MinMax::fit(&prepared)?;
        if !mode.unit_interval() {
            let peak = range.lo.abs().max(range.hi.abs());
            range = MinMax { lo: -peak, hi: peak };
        }
        Ok(FeatureScaler { mode, range })
    }

    fn pre(mode: Normalization, m: &FeatureMatrix) -> FeatureMatrix {
        match mode {
            Normalization::MinMax => m.clone(),
            Normalization::Centered | Normalization::Symmetric => center_channels(m),
            Normalization::Instance => {
                let mut c = center_channels(m);
                let peak = c.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
                c.values_mut().iter_mut().for_each(|v| *v /= peak);
                c
            }
        }
    }

    pub fn apply(&self, m: &FeatureMatrix) -> FeatureMatrix {
        let mut out = self.range.apply(&Self::pre(self.mode, m));
        if !self.mode.unit_interval() {
            out.values_mut().iter_mut().for_each(|v| *v = 2.0 * *v - 1.0);
        }
        out
    }
}

/// Source and target datasets named by the configuration.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<(GestureDataset, GestureDataset)> {
    match &cfg.data {
        DataSource::Files { source, target } => {
            let s = GestureDataset::load(source)?;
            let t = GestureDataset::load(target)?;
            for (ds, want) in [(&s, cfg.source), (&t, cfg.target)] {
                if ds.modality != want {
                    return Err(Error::Config(format!("expected a {want} dataset, found {}", ds.modality)));
                }
            }
            Ok((s, t))
        }
        DataSource::Synthetic(spec) => {
            let lineage = SeedLineage::root(cfg.seed).child("synth");
            let all = random_classes(spec.n_classes, &mut lineage.child("classes").rng())?;
            let pick = |ids: &[String]| -> Vec<_> { all.iter().filter(|c| ids.contains(&c.class_id)).cloned().collect() };
            let labeled = pick(&cfg.labeled);
            let unseen = pick(&cfg.unseen);
            let mut both = labeled.clone();
            both.extend(unseen.iter().cloned());
            let source_users = spec.population.draw(spec.source_users, 0, &mut lineage.child("source-users").rng())?;
            let target_users = spec.population.draw(spec.target_users, 100, &mut lineage.child("target-users").rng())?;
            let source = synthesize(cfg.source, &both, &source_users, spec.source_reps, &spec.render, &lineage.child("source"))?;
            let tl = lineage.child("target");
            let mut target = synthesize(cfg.target, &labeled, &target_users, spec.target_train_reps, &spec.render, &tl)?;
            let test = synthesize(cfg.target, &unseen, &target_users, spec.target_test_reps, &spec.render, &tl)?;
            target.instances.extend(test.instances);
            Ok((source, target))
        }
    }
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

fn features_of(instances: &[(&str, &Observation)]) -> Result<Vec<FeatureMatrix>> {
    instances
        .par_iter()
        .map(|(id, obs)| {
            extract_features(obs).map_err(|e| Error::Dataset {
                instance: id.to_string(),
                reason: e.to_string(),
            })
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, &s)
}

/// Instances of one experiment after the domain split.
#[derive(Debug, Clone)]
pub struct Split {
    /// Source instances of the labelled classes.
    pub source_labeled: Vec<Instance>,
    /// First `exemplars_per_class` source instances of every unseen class.
    pub exemplars: Vec<Instance>,
    /// Target instances of the labelled classes.
    pub d_l: Vec<Instance>,
    /// Target instances of the unseen classes, labels sequestered.
    pub d_u: UnlabeledDomain,
}

/// Loads or synthesises the data and splits it into domains.
pub fn prepare(cfg: &ExperimentConfig, audit: &mut AuditLog) -> Result<Split> {
    stage("config", || cfg.validate())?;
    let (source_ds, target_ds) = stage("data", || load_datasets(cfg))?;
    let (d_l, d_u) = stage("split", || split_domains(&target_ds, &cfg.labeled, &cfg.unseen, audit))?;
    stage("split", || {
        let source_labeled: Vec<Instance> = source_ds.instances.iter().filter(|i| cfg.labeled.contains(&i.class)).cloned().collect();
        let mut exemplars = Vec::new();
        for c in &cfg.unseen {
            let of_class: Vec<Instance> =
                source_ds.instances.iter().filter(|i| &i.class == c).take(cfg.exemplars_per_class).cloned().collect();
            if of_class.is_empty() {
                return Err(Error::InvalidInput(format!("class {c} has no source exemplars")));
            }
            exemplars.extend(of_class);
        }
        if let Some(c) = cfg.labeled.iter().find(|c| !source_labeled.iter().any(|i| &i.class == *c)) {
            return Err(Error::InvalidInput(format!("class {c} has no source instances")));
        }
        Ok(Split { source_labeled, exemplars, d_l, d_u })
    })
}

fn matrices(items: &[Instance]) -> Result<Vec<FeatureMatrix>> {
    features_of(&items.iter().map(|i| (i.id.as_str(), &i.data)).collect::<Vec<_>>())
}

fn unlabeled_matrices(d_u: &UnlabeledDomain) -> Result<Vec<FeatureMatrix>> {
    features_of(&d_u.instances.iter().map(|i| (i.id.as_str(), &i.data)).collect::<Vec<_>>())
}

/// Everything training produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModels {
    pub source_ae: Autoencoder,
    pub target_ae: Autoencoder,
    pub discriminator: Discriminator,
    /// Encoders as they were after pretraining, for the no-alignment baseline.
    pub pretrained_source_encoder: Network,
    pub pretrained_target_encoder: Network,
    pub source_scaler: FeatureScaler,
    pub target_scaler: FeatureScaler,
    pub alignment: AlignmentReport,
    pub pretrain_traces: (Vec<f64>, Vec<f64>),
}

const ROLES: [&str; 7] = [
    "source_encoder",
    "source_decoder",
    "target_encoder",
    "target_decoder",
    "discriminator",
    "pretrained_source_encoder",
    "pretrained_target_encoder",
];

#[derive(Serialize, Deserialize)]
struct ModelState {
    source_scaler: FeatureScaler,
    target_scaler: FeatureScaler,
    alignment: AlignmentReport,
    pretrain_traces: (Vec<f64>, Vec<f64>),
}

impl TrainedModels {
    fn networks(&self) -> [&Network; 7] {
        [
            &self.source_ae.encoder,
            &self.source_ae.decoder,
            &self.target_ae.encoder,
            &self.target_ae.decoder,
            &self.discriminator.net,
            &self.pretrained_source_encoder,
            &self.pretrained_target_encoder,
        ]
    }

    /// Writes checkpoints, scalers and the alignment report under `dir`.
    pub fn save(&self, dir: &Path, lineage: &SeedLineage) -> Result<()> {
        let ckpt = dir.join("checkpoints");
        fs::create_dir_all(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
        for (role, net) in ROLES.iter().zip(self.networks()) {
            save_weights(&net.spec, &net.weights, role, &lineage.child(role), &ckpt.join(format!("{role}.json")))?;
        }
        write_json(
            &dir.join("model_state.json"),
            &ModelState {
                source_scaler: self.source_scaler.clone(),
                target_scaler: self.target_scaler.clone(),
                alignment: self.alignment.clone(),
                pretrain_traces: self.pretrain_traces.clone(),
            },
        )?;
        write_json(&dir.join("alignment.json"), &self.alignment)?;
        write_file(&dir.join("alignment_trace.csv"), &self.alignment.trace_csv())?;
        let mut csv = String::from("epoch,source_loss,target_loss\n");
        for (i, (a, b)) in self.pretrain_traces.0.iter().zip(&self.pretrain_traces.1).enumerate() {
            csv.push_str(&format!("{i},{a},{b}\n"));
        }
        write_file(&dir.join("pretrain_loss.csv"), &csv)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut nets = Vec::with_capacity(ROLES.len());
        for role in ROLES {
            let (spec, weights) = load_weights(&dir.join("checkpoints").join(format!("{role}.json")))?;
            nets.push(Network::new(spec, weights)?);
        }
        let path = dir.join("model_state.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let state: ModelState = serde_json::from_str(&text)?;
        let mut it = nets.into_iter();
        let mut next = || it.next().expect("seven roles");
        Ok(TrainedModels {
            source_ae: Autoencoder::from_parts(next(), next())?,
            target_ae: Autoencoder::from_parts(next(), next())?,
            discriminator: Discriminator { net: next() },
            pretrained_source_encoder: next(),
            pretrained_target_encoder: next(),
            source_scaler: state.source_scaler,
            target_scaler: state.target_scaler,
            alignment: state.alignment,
            pretrain_traces: state.pretrain_traces,
        })
    }
}

/// Extraction, pretraining and alignment. Only labelled target instances
/// (and, when configured, unlabelled target features) are touched.
pub fn train(cfg: &ExperimentConfig, split: &Split, audit: &mut AuditLog) -> Result<TrainedModels> {
    let lineage = SeedLineage::root(cfg.seed);
    let (src_m, ex_m, dl_m, du_m) = stage("extract", || {
        let du = if cfg.features.transductive_pretrain { unlabeled_matrices(&split.d_u)? } else { Vec::new() };
        Ok((matrices(&split.source_labeled)?, matrices(&split.exemplars)?, matrices(&split.d_l)?, du))
    })?;
    let layout = cfg.features.layout;
    let (source_scaler, target_scaler) = stage("extract", || {
        let s = FeatureScaler::fit(cfg.features.normalization, &src_m.iter().chain(&ex_m).collect::<Vec<_>>())?;
        let t = FeatureScaler::fit(cfg.features.normalization, &dl_m.iter().chain(&du_m).collect::<Vec<_>>())?;
        Ok((s, t))
    })?;
    let flat = |scaler: &FeatureScaler, ms: &[FeatureMatrix]| -> Vec<Vec<f64>> {
        ms.iter().map(|m| scaler.apply(m).flatten(layout)).collect()
    };
    let src_flat = flat(&source_scaler, &src_m);
    let dl_flat = flat(&target_scaler, &dl_m);

    let sched = &cfg.schedule;
    let (mut source_ae, mut target_ae, traces) = stage("pretrain", || {
        let mut s_ae = Autoencoder::new(input_len(cfg.source), &cfg.autoencoder, &mut lineage.child("source_ae").rng())?;
        let mut t_ae = Autoencoder::new(input_len(cfg.target), &cfg.autoencoder, &mut lineage.child("target_ae").rng())?;
        let mut s_data = src_flat.clone();
        s_data.extend(flat(&source_scaler, &ex_m));
        let mut t_data = dl_flat.clone();
        t_data.extend(flat(&target_scaler, &du_m));
        let (s_trace, t_trace) = rayon::join(
            || pretrain_autoencoder(&mut s_ae, &s_data, sched.pretrain_epochs, sched.recon_loss, sched.pretrain_sgd, &mut lineage.child("pretrain_source").rng()),
            || pretrain_autoencoder(&mut t_ae, &t_data, sched.pretrain_epochs, sched.recon_loss, sched.pretrain_sgd, &mut lineage.child("pretrain_target").rng()),
        );
        Ok((s_ae, t_ae, (s_trace?, t_trace?)))
    })?;
    audit.record("pretrain", &cfg.labeled, false);
    let pretrained_source_encoder = source_ae.encoder.clone();
    let pretrained_target_encoder = target_ae.encoder.clone();

    let mut discriminator = Discriminator::new(cfg.autoencoder.latent_len, &mut lineage.child("discriminator").rng())?;
    let target_classes: Vec<String> = split.d_l.iter().map(|i| i.class.clone()).collect();
    let alignment = stage("align", || {
        let s = ClassBatches::group(split.source_labeled.iter().map(|i| i.class.clone()).zip(src_flat.iter().cloned()));
        let t = ClassBatches::group(target_classes.iter().cloned().zip(dl_flat.iter().cloned()));
        align(&mut source_ae, &mut target_ae, &mut discriminator, &s, &t, sched, sched.pretrain_epochs, &mut lineage.child("align").rng())
    })?;
    audit.record("align", &target_classes, false);
    Ok(TrainedModels {
        source_ae,
        target_ae,
        discriminator,
        pretrained_source_encoder,
        pretrained_target_encoder,
        source_scaler,
        target_scaler,
        alignment,
        pretrain_traces: traces,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub source: Modality,
    pub target: Modality,
    pub accuracy: AccuracyReport,
    /// Same pipeline with the alignment loop skipped.
    pub no_alignment: AccuracyReport,
    pub alignment: AlignmentReport,
    pub pretrain_final_loss: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: RunReport,
    pub predictions: Vec<PredictionRecord>,
    pub no_alignment_predictions: Vec<PredictionRecord>,
}

fn predict_all(
    encoder: &Network,
    protos: &crate::recognize::ClassPrototypeSet,
    queries: &[(String, Vec<f64>)],
) -> Result<Vec<(String, crate::recognize::Prediction)>> {
    queries
        .par_iter()
        .map(|(id, x)| Ok((id.clone(), classify(&encode(encoder, x)?, protos)?)))
        .collect()
}

/// Prototype building, classification of every unlabelled target instance
/// and scoring, for the aligned and the pretrained-only encoders.
pub fn evaluate(cfg: &ExperimentConfig, split: Split, models: &TrainedModels, audit: &mut AuditLog) -> Result<Evaluation> {
    let layout = cfg.features.layout;
    let (exemplar_items, queries) = stage("extract", || {
        let ex: Vec<(String, Vec<f64>)> = split
            .exemplars
            .iter()
            .zip(matrices(&split.exemplars)?)
            .map(|(i, m)| (i.class.clone(), models.source_scaler.apply(&m).flatten(layout)))
            .collect();
        let q: Vec<(String, Vec<f64>)> = split
            .d_u
            .instances
            .iter()
            .zip(unlabeled_matrices(&split.d_u)?)
            .map(|(i, m)| (i.id.clone(), models.target_scaler.apply(&m).flatten(layout)))
            .collect();
        Ok((ex, q))
    })?;
    let (aligned, unaligned) = stage("classify", || {
        let protos = build_prototypes(&models.source_ae.encoder, &exemplar_items, &cfg.unseen)?;
        let base = build_prototypes(&models.pretrained_source_encoder, &exemplar_items, &cfg.unseen)?;
        Ok((
            predict_all(&models.target_ae.encoder, &protos, &queries)?,
            predict_all(&models.pretrained_target_encoder, &base, &queries)?,
        ))
    })?;
    audit.record("classify", &[], false);

    let truths = split.d_u.labels.reveal(audit, SCORING_STAGE);
    stage("score", || {
        let truth_list: Vec<String> = queries.iter().map(|(id, _)| truths[id].clone()).collect();
        let records = |preds: &[(String, crate::recognize::Prediction)]| -> Vec<PredictionRecord> {
            preds
                .iter()
                .zip(&truth_list)
                .map(|((id, p), t)| PredictionRecord {
                    instance_id: id.clone(),
                    true_class: t.clone(),
                    pred_class: p.class.clone(),
                    score: p.score,
                    margin: p.margin,
                })
                .collect()
        };
        let labels = |preds: &[(String, crate::recognize::Prediction)]| -> Vec<String> { preds.iter().map(|(_, p)| p.class.clone()).collect() };
        let report = RunReport {
            name: cfg.name.clone(),
            seed: cfg.seed,
            source: cfg.source,
            target: cfg.target,
            accuracy: accuracy_table(&labels(&aligned), &truth_list, &cfg.unseen)?,
            no_alignment: accuracy_table(&labels(&unaligned), &truth_list, &cfg.unseen)?,
            alignment: models.alignment.clone(),
            pretrain_final_loss: (
                models.pretrain_traces.0.last().copied().unwrap_or(f64::NAN),
                models.pretrain_traces.1.last().copied().unwrap_or(f64::NAN),
            ),
        };
        Ok(Evaluation {
            report,
            predictions: records(&aligned),
            no_alignment_predictions: records(&unaligned),
        })
    })
}

/// Writes the report, per-class plot data, predictions and audit log.
pub fn write_evaluation(dir: &Path, eval: &Evaluation, audit: &AuditLog) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("report.json"), &eval.report)?;
    write_json(&dir.join("audit.json"), audit)?;
    emit_plots(&eval.report.accuracy, &dir.join("accuracy.csv"))?;
    for (name, preds) in [("predictions.csv", &eval.predictions), ("predictions_no_alignment.csv", &eval.no_alignment_predictions)] {
        let mut buf = Vec::new();
        write_predictions(&mut buf, preds)?;
        write_file(&dir.join(name), &String::from_utf8(buf).expect("csv is utf-8"))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub evaluation: Evaluation,
    pub models: TrainedModels,
    pub audit: AuditLog,
}

impl ExperimentOutcome {
    pub fn report(&self) -> &RunReport {
        &self.evaluation.report
    }
}

/// The full pipeline. With `out`, the resolved config, trained models and
/// evaluation artifacts are written as each phase completes.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentOutcome> {
    if let Some(dir) = out {
        stage("write", || {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write_file(&dir.join("config.toml"), &cfg.to_toml()?)
        })?;
    }
    let mut audit = AuditLog::default();
    let split = prepare(cfg, &mut audit)?;
    let models = train(cfg, &split, &mut audit)?;
    if let Some(dir) = out {
        stage("write", || models.save(dir, &SeedLineage::root(cfg.seed)))?;
    }
    let evaluation = evaluate(cfg, split, &models, &mut audit)?;
    if let Some(dir) = out {
        stage("write", || write_evaluation(dir, &evaluation, &audit))?;
    }
    Ok(ExperimentOutcome { evaluation, models, audit })
}
