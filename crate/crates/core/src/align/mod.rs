//! Per-modality autoencoders and adversarial alignment of their latent
//! spaces.

pub mod autoencoder;
pub mod discriminator;
pub mod mmd;
pub mod suite;
pub mod train;

pub use autoencoder::{autoencoder_specs, Autoencoder, AutoencoderConfig, HIDDEN_LEN, LATENT_LEN};
pub use discriminator::{discriminator_spec, Discriminator};
pub use mmd::{median_bandwidth, mmd, mmd_with, MmdEstimator};
pub use suite::{architectures, gradcheck_suite, GRADCHECK_EPS};
pub use train::{
    adversarial_loss, adversarial_round, align, discriminator_loss, honest_loss, pretrain_autoencoder,
    train_discriminator, AlignmentReport, AlignmentSchedule, ClassBatches, DiscriminatorOutcome, FlipMode,
    IterationRecord, RoundConfig, StopReason, SOURCE_LABEL, TARGET_LABEL,
};
