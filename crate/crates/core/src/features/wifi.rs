//! Wrist position from WiFi angle-of-arrival geometry.
//!
//! For one transmitter/receiver pair the wrist at distance `r` seen at
//! azimuth `alpha_z` and elevation `el` lies at
//!
//! ```text
//! x = r * tan(alpha_z)
//! z = r * tan(el) / cos(alpha_z)
//! ```

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};

pub const WIFI_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WifiObservation {
    pub r: f64,
    pub alpha_z: f64,
    pub el: f64,
}

pub fn wifi_coords(obs: &WifiObservation) -> Result<(f64, f64)> {
    let WifiObservation { r, alpha_z, el } = *obs;
    if !(alpha_z > 0.0 && alpha_z < FRAC_PI_2) {
        return Err(Error::Domain(format!("azimuth {alpha_z} rad outside (0, pi/2)")));
    }
    if !(0.0..FRAC_PI_2).contains(&el) {
        return Err(Error::Domain(format!("elevation {el} rad outside [0, pi/2)")));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Domain(format!("distance {r} is not a finite non-negative value")));
    }
    Ok((r * alpha_z.tan(), r * el.tan() / alpha_z.cos()))
}

/// Per-time-step mean over antenna pairs of `x`, `z` and `r`, as a `3 × 200`
/// matrix with rows `x`, `z`, `r`.
pub fn wifi_feature_matrix(per_pair: &[Vec<WifiObservation>]) -> Result<FeatureMatrix> {
    if per_pair.is_empty() {
        return Err(Error::InvalidInput("no antenna pairs".into()));
    }
    for (p, samples) in per_pair.iter().enumerate() {
        if samples.len() != WIFI_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "antenna pair {p} has {} samples, expected {WIFI_SAMPLES}",
                samples.len()
            )));
        }
    }
    let mut m = FeatureMatrix::zeros(3, WIFI_SAMPLES);
    for samples in per_pair {
        for (t, obs) in samples.iter().enumerate() {
            let (x, z) = wifi_coords(obs)?;
            m.row_mut(0)[t] += x;
            m.row_mut(1)[t] += z;
            m.row_mut(2)[t] += obs.r;
        }
    }
    let p = per_pair.len() as f64;
    m.values_mut().iter_mut().for_each(|v| *v /= p);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn documented_points() {
        let (x, z) = wifi_coords(&WifiObservation { r: 1.0, alpha_z: deg(45.0), el: 0.0 }).unwrap();
        assert!((x - 1.0).abs() < 1e-15 && z == 0.0);
        let (x, z) = wifi_coords(&WifiObservation { r: 2.0, alpha_z: deg(30.0), el: deg(30.0) }).unwrap();
        assert!((x - 1.154701).abs() < 1e-6);
        assert!((z - 1.333333).abs() < 1e-6);
        let (x, z) = wifi_coords(&WifiObservation { r: 0.0, alpha_z: deg(45.0), el: deg(45.0) }).unwrap();
        assert_eq!((x, z), (0.0, 0.0));
    }

    #[test]
    fn domain_bounds() {
        for a in [0.0, FRAC_PI_2, -0.1, 2.0] {
            assert!(matches!(
                wifi_coords(&WifiObservation { r: 1.0, alpha_z: a, el: 0.1 }),
                Err(Error::Domain(_))
            ));
        }
        assert!(wifi_coords(&WifiObservation { r: 1.0, alpha_z: 0.3, el: FRAC_PI_2 }).is_err());
    }

    fn constant_pair(alpha: f64) -> Vec<WifiObservation> {
        vec![WifiObservation { r: 1.0, alpha_z: alpha, el: 0.2 }; WIFI_SAMPLES]
    }

    #[test]
    fn two_pair_mean() {
        // tan(a1) = 1, tan(a2) = 3
        let m = wifi_feature_matrix(&[constant_pair(1f64.atan()), constant_pair(3f64.atan())]).unwrap();
        assert!((m.get(0, 17) - 2.0).abs() < 1e-12);
        assert_eq!(m.shape(), (3, 200));
    }

    #[test]
    fn single_pair_is_sample_wise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pair: Vec<WifiObservation> = (0..WIFI_SAMPLES)
            .map(|_| WifiObservation {
                r: rng.random_range(1.0..3.0),
                alpha_z: rng.random_range(0.1..1.4),
                el: rng.random_range(0.0..1.4),
            })
            .collect();
        let m = wifi_feature_matrix(std::slice::from_ref(&pair)).unwrap();
        for (t, o) in pair.iter().enumerate() {
            let (x, z) = wifi_coords(o).unwrap();
            assert_eq!((m.get(0, t), m.get(1, t), m.get(2, t)), (x, z, o.r));
        }
    }

    #[test]
    fn ninety_pairs_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<Vec<WifiObservation>> = (0..90)
            .map(|_| {
                (0..WIFI_SAMPLES)
                    .map(|_| WifiObservation {
                        r: rng.random_range(1.0..3.0),
                        alpha_z: rng.random_range(0.1..1.4),
                        el: rng.random_range(0.0..1.4),
                    })
                    .collect()
            })
            .collect();
        let m = wifi_feature_matrix(&pairs).unwrap();
        for t in 0..WIFI_SAMPLES {
            let xs: Vec<f64> = pairs.iter().map(|p| p[t].r * p[t].alpha_z.tan()).collect();
            let zs: Vec<f64> = pairs.iter().map(|p| p[t].r * p[t].el.tan() / p[t].alpha_z.cos()).collect();
            let rs: Vec<f64> = pairs.iter().map(|p| p[t].r).collect();
            for (row, v) in [xs, zs, rs].iter().enumerate() {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                assert!((m.get(row, t) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ragged_pairs_are_rejected() {
        let mut short = constant_pair(0.5);
        short.pop();
        assert!(wifi_feature_matrix(&[constant_pair(0.5), short]).is_err());
    }
}
