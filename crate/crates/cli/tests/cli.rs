use std::process::{Command, Output};

fn transfer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transfer")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: [&str; 16] = [
    "--set", "labeled=[\"g00\",\"g01\",\"g02\",\"g03\"]",
    "--set", "unseen=[\"g04\",\"g05\"]",
    "--set", "exemplars_per_class=2",
    "--set", "data.n_classes=6",
    "--set", "data.target_test_reps=3",
    "--set", "schedule.pretrain_epochs=10",
    "--set", "schedule.total_epoch_budget=30",
    "--set", "schedule.max_adversarial_iterations=3",
];

#[test]
fn help_lists_the_subcommands() {
    let out = transfer(&["--help"]);
    assert!(out.status.success());
    for cmd in ["synth", "train", "eval", "run", "gradcheck"] {
        assert!(stdout(&out).contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn gradcheck_passes_for_one_seed() {
    let out = transfer(&["gradcheck", "--seeds", "1"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.ends_with(" ok")).count(), 5);
}

#[test]
fn unknown_scenario_exits_nonzero() {
    let out = transfer(&["run", "--scenario", "radar-sonar"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn malformed_override_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    assert!(!transfer(&["run", "--out", out_dir, "--set", "no_equals_sign"]).status.success());
    assert!(!transfer(&["run", "--out", out_dir, "--set", "schedule.pretrain_epochs=\"many\""]).status.success());
}

#[test]
fn synth_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let mut args = vec!["synth", "--out", data.to_str().unwrap(), "--seed", "5"];
    args.extend(SMALL);
    assert!(transfer(&args).status.success());
    let cfg = data.join("experiment.toml");
    assert!(cfg.is_file());

    let common = ["--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap()];
    let train = transfer(&[&["train"][..], &common].concat());
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(run.join("checkpoints").is_dir());

    let eval = transfer(&[&["eval"][..], &common].concat());
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(stdout(&eval).contains("without alignment"));
    assert!(run.join("report.json").is_file());
}
