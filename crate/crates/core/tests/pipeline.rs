use std::fs;
use std::path::Path;

use transfer_core::experiment::{
    evaluate, load_datasets, prepare, run_experiment, train, AuditLog, DataSource, ExperimentConfig, Scenario,
    TrainedModels,
};
use transfer_core::Error;

/// A video→WiFi configuration small enough to run in a second or two.
fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Scenario::VideoWifi);
    cfg.name = "tiny".into();
    cfg.labeled = ["g00", "g01", "g02", "g03"].map(String::from).to_vec();
    cfg.unseen = ["g04", "g05"].map(String::from).to_vec();
    cfg.exemplars_per_class = 2;
    cfg.seed = 3;
    if let DataSource::Synthetic(s) = &mut cfg.data {
        s.n_classes = 6;
        s.source_users = 2;
        s.target_users = 2;
        s.source_reps = 2;
        s.target_train_reps = 2;
        s.target_test_reps = 3;
    }
    cfg.schedule.pretrain_epochs = 15;
    cfg.schedule.total_epoch_budget = 60;
    cfg.schedule.max_adversarial_iterations = 4;
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let outcome = run_experiment(&cfg, Some(dir.path())).unwrap();
    for name in [
        "config.toml",
        "report.json",
        "audit.json",
        "accuracy.csv",
        "predictions.csv",
        "predictions_no_alignment.csv",
        "alignment.json",
        "alignment_trace.csv",
        "pretrain_loss.csv",
        "model_state.json",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let report = outcome.report();
    assert_eq!(report.accuracy.n_instances, 2 * 3);
    assert_eq!(report.accuracy.per_class.len(), 2);
    assert_eq!(report.pretrain_final_loss.0, *outcome.models.pretrain_traces.0.last().unwrap());
    outcome.audit.check_label_hygiene(&cfg.unseen).unwrap();
    let predictions = String::from_utf8(read(dir.path(), "predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 1 + 6);
    let saved = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&tiny(), Some(a.path())).unwrap();
    run_experiment(&tiny(), Some(b.path())).unwrap();
    for name in ["report.json", "predictions.csv", "model_state.json", "checkpoints/target_encoder.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn different_seeds_give_different_models() {
    let a = run_experiment(&tiny(), None).unwrap();
    let mut cfg = tiny();
    cfg.seed += 1;
    let b = run_experiment(&cfg, None).unwrap();
    assert_ne!(a.models.target_ae, b.models.target_ae);
}

#[test]
fn saved_checkpoints_reproduce_the_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let outcome = run_experiment(&cfg, Some(dir.path())).unwrap();
    let loaded = TrainedModels::load(dir.path()).unwrap();
    assert_eq!(loaded, outcome.models);
    let mut audit = AuditLog::default();
    let split = prepare(&cfg, &mut audit).unwrap();
    let eval = evaluate(&cfg, split, &loaded, &mut audit).unwrap();
    assert_eq!(&eval.report, outcome.report());
}

#[test]
fn exported_datasets_give_the_same_result_as_synthesis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let (source, target) = load_datasets(&cfg).unwrap();
    source.save(dir.path().join("source")).unwrap();
    target.save(dir.path().join("target")).unwrap();
    let mut files = cfg.clone();
    files.data = DataSource::Files {
        source: dir.path().join("source"),
        target: dir.path().join("target"),
    };
    let a = run_experiment(&cfg, None).unwrap();
    let b = run_experiment(&files, None).unwrap();
    assert_eq!(a.report(), b.report());
}

#[test]
fn training_never_sees_unseen_target_labels() {
    let cfg = tiny();
    let mut audit = AuditLog::default();
    let split = prepare(&cfg, &mut audit).unwrap();
    assert!(split.d_l.iter().all(|i| cfg.labeled.contains(&i.class)));
    train(&cfg, &split, &mut audit).unwrap();
    audit.check_label_hygiene(&cfg.unseen).unwrap();
    assert!(audit.events.iter().all(|e| !e.held_out_labels));
}

#[test]
fn a_missing_instance_file_fails_in_the_data_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let (source, target) = load_datasets(&cfg).unwrap();
    source.save(dir.path().join("source")).unwrap();
    target.save(dir.path().join("target")).unwrap();
    let victim = &target.instances[0].id;
    fs::remove_file(dir.path().join("target/instances").join(format!("{victim}.csv"))).unwrap();
    let mut files = cfg.clone();
    files.data = DataSource::Files {
        source: dir.path().join("source"),
        target: dir.path().join("target"),
    };
    match run_experiment(&files, None) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "data");
            assert!(source.to_string().contains(victim.as_str()), "{source}");
        }
        other => panic!("expected a data stage error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn a_modality_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let (source, target) = load_datasets(&cfg).unwrap();
    source.save(dir.path().join("source")).unwrap();
    target.save(dir.path().join("target")).unwrap();
    let mut files = cfg.clone();
    files.data = DataSource::Files {
        source: dir.path().join("target"),
        target: dir.path().join("source"),
    };
    assert!(run_experiment(&files, None).is_err());
}
