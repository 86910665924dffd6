use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use transfer_core::align::{gradcheck_suite, AutoencoderConfig};
use transfer_core::experiment::{
    evaluate, load_datasets, prepare, run_experiment, train, write_evaluation, AuditLog, DataSource, ExperimentConfig,
    RunReport, Scenario, TrainedModels,
};
use transfer_core::seed::SeedLineage;
use transfer_core::{Error, Result};

#[derive(Parser)]
#[command(name = "transfer", version, about = "Cross-technology gesture recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic source and target datasets.
    Synth(Common),
    /// Pretrain and align the autoencoders, writing checkpoints.
    Train(Common),
    /// Classify unseen target instances with trained checkpoints.
    Eval(Common),
    /// Full pipeline: train, evaluate and report.
    Run(Common),
    /// Finite-difference check of every network architecture.
    Gradcheck(GradArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset, used when no config is given.
    #[arg(long, default_value = "video-wifi")]
    scenario: String,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config field, e.g. `schedule.adversarial_epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct GradArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Autoencoder layout to check (TOML), defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not KEY=VALUE")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let base = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(c.scenario.parse::<Scenario>()?),
    };
    let mut cfg = if c.overrides.is_empty() {
        base
    } else {
        let mut table: toml::Table = toml::from_str(&base.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        for o in &c.overrides {
            apply_override(&mut table, o)?;
        }
        let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        ExperimentConfig::from_toml(&text)?
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: &ExperimentConfig) -> PathBuf {
    c.out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
}

fn summarize(r: &RunReport) {
    let a = &r.alignment;
    println!("scenario        {} ({} -> {}), seed {}", r.name, r.source, r.target, r.seed);
    println!(
        "alignment       {} iterations, stop: {}, epochs {}, mmd {:.5} -> {:.5}",
        a.iterations.len(),
        a.stop_reason.name(),
        a.epochs,
        a.mmd_before,
        a.mmd_after()
    );
    println!(
        "accuracy        {:.1}% ({}/{}), without alignment {:.1}%",
        r.accuracy.overall_accuracy, r.accuracy.n_correct, r.accuracy.n_instances, r.no_alignment.overall_accuracy
    );
    for c in &r.accuracy.per_class {
        println!("  {:<12} {:>4} {:>4} {:>6.1}%", c.class, c.n_instances, c.n_correct, c.accuracy);
    }
}

fn synth(c: &Common) -> Result<()> {
    let mut cfg = load_config(c)?;
    if !matches!(cfg.data, DataSource::Synthetic(_)) {
        return Err(Error::Config("synth needs a synthetic data block".into()));
    }
    let dir = out_dir(c, &cfg);
    let (source, target) = load_datasets(&cfg)?;
    let (s_dir, t_dir) = (dir.join("source"), dir.join("target"));
    source.save(&s_dir)?;
    target.save(&t_dir)?;
    cfg.data = DataSource::Files {
        source: s_dir.canonicalize().map_err(|e| Error::io(&s_dir, e))?,
        target: t_dir.canonicalize().map_err(|e| Error::io(&t_dir, e))?,
    };
    let cfg_path = dir.join("experiment.toml");
    std::fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    println!(
        "wrote {} {} and {} {} instances under {}",
        source.instances.len(),
        source.modality,
        target.instances.len(),
        target.modality,
        dir.display()
    );
    println!("config for these files: {}", cfg_path.display());
    Ok(())
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()?).map_err(|e| Error::io(&path, e))
}

fn train_cmd(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let dir = out_dir(c, &cfg);
    write_config(&dir, &cfg)?;
    let mut audit = AuditLog::default();
    let split = prepare(&cfg, &mut audit)?;
    let models = train(&cfg, &split, &mut audit)?;
    models.save(&dir, &SeedLineage::root(cfg.seed))?;
    let a = &models.alignment;
    println!(
        "trained: {} alignment iterations, stop: {}, mmd {:.5} -> {:.5}; checkpoints in {}",
        a.iterations.len(),
        a.stop_reason.name(),
        a.mmd_before,
        a.mmd_after(),
        dir.join("checkpoints").display()
    );
    Ok(())
}

fn eval_cmd(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let dir = out_dir(c, &cfg);
    let models = TrainedModels::load(&dir)?;
    let mut audit = AuditLog::default();
    let split = prepare(&cfg, &mut audit)?;
    let eval = evaluate(&cfg, split, &models, &mut audit)?;
    audit.check_label_hygiene(&cfg.unseen)?;
    write_evaluation(&dir, &eval, &audit)?;
    summarize(&eval.report);
    Ok(())
}

fn run_cmd(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let dir = out_dir(c, &cfg);
    let outcome = run_experiment(&cfg, Some(&dir))?;
    outcome.audit.check_label_hygiene(&cfg.unseen)?;
    summarize(outcome.report());
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn gradcheck(g: &GradArgs) -> Result<bool> {
    let cfg: AutoencoderConfig = match &g.config {
        Some(p) => ExperimentConfig::load(p)?.autoencoder,
        None => AutoencoderConfig::default(),
    };
    let mut ok = true;
    for seed in g.seed..g.seed + g.seeds {
        for (name, r) in gradcheck_suite(&cfg, seed)? {
            let pass = r.max_relative_error < 1e-4;
            ok &= pass;
            println!(
                "seed {seed:>3} {name:<14} max rel err {:.3e} ({} checked, {} skipped) {}",
                r.max_relative_error,
                r.checked,
                r.skipped,
                if pass { "ok" } else { "FAIL" }
            );
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(c) => synth(c).map(|_| true),
        Command::Train(c) => train_cmd(c).map(|_| true),
        Command::Eval(c) => eval_cmd(c).map(|_| true),
        Command::Run(c) => run_cmd(c).map(|_| true),
        Command::Gradcheck(g) => gradcheck(g),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
