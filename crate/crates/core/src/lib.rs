//! Cross-modal gesture recognition by adversarial latent alignment.
//!
//! Gestures recorded with one sensing technology (the source, e.g. video
//! keypoints) are used to recognise gestures captured by another (the target,
//! e.g. WiFi angle-of-arrival). Each modality gets its own convolutional
//! autoencoder; a discriminator then pushes the two latent spaces together,
//! and unseen target gestures are classified by cosine similarity against a
//! handful of source exemplars.

pub mod align;
pub mod error;
pub mod experiment;
pub mod features;
pub mod nn;
pub mod recognize;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
