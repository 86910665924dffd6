//! Config-driven transfer experiments: data loading or synthesis, domain
//! split with label sequestering, the full training pipeline and scoring.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod split;

pub use config::{DataSource, ExperimentConfig, FeatureConfig, Normalization, Scenario, SynthData, BENCHMARK_SEED};
pub use pipeline::{
    evaluate, extract_features, input_len, load_datasets, prepare, run_experiment, train, write_evaluation, Evaluation,
    ExperimentOutcome, FeatureScaler, RunReport, Split, TrainedModels,
};
pub use report::{accuracy_table, emit_plots, percent, read_plot_data, AccuracyReport, ClassAccuracy};
pub use split::{split_domains, AuditEvent, AuditLog, HeldOutLabels, UnlabeledDomain, UnlabeledInstance, SCORING_STAGE};
