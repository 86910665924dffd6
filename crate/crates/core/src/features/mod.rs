//! Conversion of raw modality observations into fixed-shape feature
//! matrices: `4 × 200` wrist tracks for video, `3 × 200` wrist coordinates
//! for WiFi and `3 × 600` displacement for accelerometers.

pub mod calculus;
pub mod matrix;
pub mod pose;
pub mod wifi;

pub use calculus::{accel_displacement_with, finite_difference, resample, DisplacementOptions, DriftRemoval};
pub use matrix::{FeatureMatrix, Layout, MinMax};
pub use pose::{
    location_tokens, movement_signature, normalize_pose, Hand, Keypoint, KeypointFrame, KeypointObs, LocationToken,
    MovementSignature, Zone, ZoneColumn, ZoneRow, DEFAULT_CANONICAL_FRAMES,
};
pub use wifi::{wifi_coords, wifi_feature_matrix, WifiObservation, WIFI_SAMPLES};

use crate::error::Result;

pub const ACCEL_SAMPLES: usize = 600;
pub const ACCEL_RATE_HZ: f64 = 20.0;

/// `3 × 600` displacement matrix from a `3 × M` trace sampled at 20 Hz.
pub fn accel_displacement(channels: &[Vec<f64>]) -> Result<FeatureMatrix> {
    FeatureMatrix::from_rows(accel_displacement_with(channels, &DisplacementOptions::default())?)
}
