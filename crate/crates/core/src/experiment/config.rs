use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::{AlignmentSchedule, AutoencoderConfig, FlipMode};
use crate::error::{Error, Result};
use crate::features::Layout;
use crate::synth::{Modality, RenderConfig, UserPopulation};
use crate::nn::{LossKind, SgdConfig};

/// How flattened features are mapped onto `[0, 1]` before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// One joint min-max range per modality.
    #[default]
    MinMax,
    /// Every channel of every instance is first shifted to zero mean, then
    /// one joint min-max range per modality is applied.
    Centered,
    /// Channel-centred as `Centered`, then divided by the largest absolute
    /// value seen in training, giving values in `[-1, 1]`.
    Symmetric,
    /// Channel-centred, then every instance divided by its own largest
    /// absolute value, giving values in `[-1, 1]` with per-user amplitude
    /// removed.
    Instance,
}

impl Normalization {
    /// Whether normalised values stay inside `[0, 1]`.
    pub fn unit_interval(self) -> bool {
        matches!(self, Normalization::MinMax | Normalization::Centered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub normalization: Normalization,
    pub layout: Layout,
    /// Also pretrain the target autoencoder on the unlabelled target
    /// instances (their features only).
    pub transductive_pretrain: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            normalization: Normalization::MinMax,
            layout: Layout::TimeMajor,
            transductive_pretrain: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthData {
    /// Number of generated classes, named `g00`, `g01`, ...
    pub n_classes: usize,
    pub source_users: usize,
    pub target_users: usize,
    /// Source performances of every class.
    pub source_reps: usize,
    /// Target performances of every labelled class.
    pub target_train_reps: usize,
    /// Target performances of every unseen class.
    pub target_test_reps: usize,
    pub population: UserPopulation,
    pub render: RenderConfig,
}

impl Default for SynthData {
    fn default() -> Self {
        SynthData {
            n_classes: 25,
            source_users: 6,
            target_users: 5,
            source_reps: 6,
            target_train_reps: 6,
            target_test_reps: 20,
            population: UserPopulation::default(),
            render: RenderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthData),
    /// Directories written by `GestureDataset::save`.
    Files { source: PathBuf, target: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: Modality,
    pub target: Modality,
    pub labeled: Vec<String>,
    pub unseen: Vec<String>,
    pub seed: u64,
    #[serde(default = "default_exemplars")]
    pub exemplars_per_class: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub data: DataSource,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub autoencoder: AutoencoderConfig,
    #[serde(default)]
    pub schedule: AlignmentSchedule,
}

fn default_exemplars() -> usize {
    6
}

/// Named scenario presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    VideoWifi,
    VideoAccel,
    AccelWifi,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::VideoWifi, Scenario::VideoAccel, Scenario::AccelWifi];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::VideoWifi => "video-wifi",
            Scenario::VideoAccel => "video-accel",
            Scenario::AccelWifi => "accel-wifi",
        }
    }

    /// Source, target, labelled and unseen class counts.
    pub fn shape(self) -> (Modality, Modality, usize, usize) {
        match self {
            Scenario::VideoWifi => (Modality::Video, Modality::Wifi, 15, 10),
            Scenario::VideoAccel => (Modality::Video, Modality::Accel, 16, 7),
            Scenario::AccelWifi => (Modality::Accel, Modality::Wifi, 13, 5),
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}` (video-wifi, video-accel or accel-wifi)")))
    }
}

/// Seed of the pinned synthetic benchmark.
pub const BENCHMARK_SEED: u64 = 7;

impl ExperimentConfig {
    /// Synthetic preset for `scenario`: the first classes are labelled and
    /// the rest unseen.
    pub fn preset(scenario: Scenario) -> Self {
        let (source, target, n_labeled, n_unseen) = scenario.shape();
        let ids: Vec<String> = (0..n_labeled + n_unseen).map(|i| format!("g{i:02}")).collect();
        ExperimentConfig {
            name: scenario.name().to_string(),
            source,
            target,
            labeled: ids[..n_labeled].to_vec(),
            unseen: ids[n_labeled..].to_vec(),
            seed: BENCHMARK_SEED,
            exemplars_per_class: default_exemplars(),
            out_dir: None,
            data: DataSource::Synthetic(SynthData {
                n_classes: n_labeled + n_unseen,
                ..SynthData::default()
            }),
            features: FeatureConfig {
                normalization: Normalization::Symmetric,
                ..FeatureConfig::default()
            },
            autoencoder: AutoencoderConfig::default(),
            schedule: AlignmentSchedule {
                flip: FlipMode::TargetOnly,
                adversarial_epochs: 1,
                encoder_sgd: SgdConfig { learning_rate: 5e-4, momentum: 0.9 },
                disc_sgd: SgdConfig { learning_rate: 3e-3, momentum: 0.9 },
                ..AlignmentSchedule::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source == self.target {
            return Err(Error::Config(format!("source and target are both {}", self.source)));
        }
        if self.labeled.is_empty() || self.unseen.is_empty() {
            return Err(Error::Config("labelled and unseen class lists must both be nonempty".into()));
        }
        if let Some(c) = self.labeled.iter().find(|c| self.unseen.contains(c)) {
            return Err(Error::Config(format!("class {c} is both labelled and unseen")));
        }
        for list in [&self.labeled, &self.unseen] {
            let mut sorted = list.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::Config("class lists contain duplicates".into()));
            }
        }
        if self.exemplars_per_class == 0 {
            return Err(Error::Config("at least one exemplar per class is required".into()));
        }
        if let DataSource::Synthetic(s) = &self.data {
            if s.n_classes < self.labeled.len() + self.unseen.len() {
                return Err(Error::Config(format!(
                    "{} classes generated but {} configured",
                    s.n_classes,
                    self.labeled.len() + self.unseen.len()
                )));
            }
            if s.source_reps < self.exemplars_per_class {
                return Err(Error::Config(format!(
                    "{} source performances per class cannot supply {} exemplars",
                    s.source_reps, self.exemplars_per_class
                )));
            }
            if s.source_users == 0 || s.target_users == 0 || s.target_train_reps == 0 || s.target_test_reps == 0 {
                return Err(Error::Config("synthetic user and performance counts must be positive".into()));
            }
        }
        if self.schedule.recon_loss == LossKind::Bce && !self.features.normalization.unit_interval() {
            return Err(Error::Config(format!(
                "bce reconstruction needs features in [0, 1], {:?} normalisation is signed",
                self.features.normalization
            )));
        }
        self.schedule.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
