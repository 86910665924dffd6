//! Rendering of a planar wrist path into raw observations of each modality.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trajectory::Path;
use crate::error::{Error, Result};
use crate::features::{finite_difference, resample, Keypoint, KeypointFrame, WifiObservation, ACCEL_RATE_HZ, WIFI_SAMPLES};

/// Metres per normalised body unit (one shoulder width).
pub const BODY_UNIT_M: f64 = 0.4;
pub const GRAVITY: f64 = 9.81;

/// Point around which the path is drawn, in normalised pose coordinates
/// (nose at the origin, image `y` pointing down).
pub const PATH_ANCHOR: (f64, f64) = (0.0, 1.5);
/// Resting position of the non-dominant wrist.
pub const REST_WRIST: (f64, f64) = (-0.9, 3.2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VideoRenderConfig {
    pub fps: f64,
    pub nose_px: (f64, f64),
    pub shoulder_width_px: f64,
    /// Keypoint detection noise in normalised units.
    pub keypoint_sigma: f64,
    pub min_confidence: f64,
}

impl Default for VideoRenderConfig {
    fn default() -> Self {
        VideoRenderConfig {
            fps: 33.0,
            nose_px: (320.0, 120.0),
            shoulder_width_px: 80.0,
            keypoint_sigma: 0.02,
            min_confidence: 0.8,
        }
    }
}

fn frame_count(duration: f64, rate: f64) -> usize {
    // a 3 s clip at 33 fps has frames at 0, 1/33, ..., 98/33
    ((duration * rate) + 1e-9).floor() as usize
}

/// Keypoint clip with the right wrist following `path`.
pub fn render_video<R: Rng + ?Sized>(path: &Path, cfg: &VideoRenderConfig, rng: &mut R) -> Result<Vec<KeypointFrame>> {
    if !(cfg.fps > 0.0 && cfg.shoulder_width_px > 0.0 && cfg.keypoint_sigma >= 0.0) {
        return Err(Error::Config("video renderer needs positive fps and shoulder width".into()));
    }
    if !(0.0..=1.0).contains(&cfg.min_confidence) {
        return Err(Error::Config(format!("minimum confidence {} outside [0, 1]", cfg.min_confidence)));
    }
    let n = frame_count(path.duration(), cfg.fps);
    if n == 0 {
        return Err(Error::InvalidInput("path is shorter than one video frame".into()));
    }
    let noise = Normal::new(0.0, cfg.keypoint_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let w = cfg.shoulder_width_px;
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let p = path.at(k as f64 / cfg.fps);
        let wrist = (PATH_ANCHOR.0 + p.0, PATH_ANCHOR.1 - p.1);
        let body = [
            (Keypoint::Nose, (0.0, 0.0)),
            (Keypoint::LeftEye, (-0.15, -0.2)),
            (Keypoint::RightEye, (0.15, -0.2)),
            (Keypoint::LeftShoulder, (-0.5, SHOULDER_DROP)),
            (Keypoint::RightShoulder, (0.5, SHOULDER_DROP)),
            (Keypoint::LeftWrist, REST_WRIST),
            (Keypoint::LeftElbow, (-0.8, 0.5 * (SHOULDER_DROP + REST_WRIST.1))),
            (Keypoint::RightWrist, wrist),
            (Keypoint::RightElbow, (0.5 * (0.5 + wrist.0) + 0.2, 0.5 * (SHOULDER_DROP + wrist.1))),
        ];
        let mut frame = KeypointFrame::default();
        for (kp, (x, y)) in body {
            let (jx, jy) = if cfg.keypoint_sigma > 0.0 {
                (noise.sample(rng), noise.sample(rng))
            } else {
                (0.0, 0.0)
            };
            let conf = rng.random_range(cfg.min_confidence..=1.0);
            frame = frame.with(kp, cfg.nose_px.0 + w * (x + jx), cfg.nose_px.1 + w * (y + jy), conf);
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Vertical offset of the shoulders below the nose, normalised units.
pub const SHOULDER_DROP: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WifiRenderConfig {
    pub pairs: usize,
    /// Distance from the sensor to the user's body plane, metres.
    pub range_m: f64,
    /// Position of the path origin in the body plane, metres.
    pub origin_m: (f64, f64),
    /// Standard deviation of the multiplicative noise on `r`.
    pub noise: f64,
}

impl Default for WifiRenderConfig {
    fn default() -> Self {
        WifiRenderConfig {
            pairs: 90,
            range_m: 2.0,
            origin_m: (1.0, 1.0),
            noise: 0.02,
        }
    }
}

/// Wrist position in sensor coordinates (metres) for a path point.
pub fn wifi_plane_point(p: (f64, f64), cfg: &WifiRenderConfig) -> (f64, f64) {
    (cfg.origin_m.0 + BODY_UNIT_M * p.0, cfg.origin_m.1 + BODY_UNIT_M * p.1)
}

/// Inverse of the sensor-plane mapping.
pub fn wifi_path_point(xz: (f64, f64), cfg: &WifiRenderConfig) -> (f64, f64) {
    ((xz.0 - cfg.origin_m.0) / BODY_UNIT_M, (xz.1 - cfg.origin_m.1) / BODY_UNIT_M)
}

/// Exact inverse of the angle-of-arrival geometry for one point, with `r`
/// the distance from the sensor.
pub fn wifi_observe(x: f64, z: f64, range: f64) -> Result<WifiObservation> {
    if !(x > 0.0 && z >= 0.0 && x.is_finite() && z.is_finite()) {
        return Err(Error::Domain(format!(
            "wrist at x = {x:.4} m, z = {z:.4} m is outside the sensor cone"
        )));
    }
    let r = (range * range + x * x + z * z).sqrt();
    let alpha_z = (x / r).atan();
    let el = (z * alpha_z.cos() / r).atan();
    Ok(WifiObservation { r, alpha_z, el })
}

/// `pairs` noisy observation series of `WIFI_SAMPLES` samples each.
pub fn render_wifi<R: Rng + ?Sized>(path: &Path, cfg: &WifiRenderConfig, rng: &mut R) -> Result<Vec<Vec<WifiObservation>>> {
    if cfg.pairs == 0 || !(cfg.range_m > 0.0) || !(cfg.noise >= 0.0) {
        return Err(Error::Config("WiFi renderer needs pairs > 0, positive range and non-negative noise".into()));
    }
    let xs: Vec<f64> = path.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = path.points.iter().map(|p| p.1).collect();
    let xs = resample(&xs, WIFI_SAMPLES)?;
    let ys = resample(&ys, WIFI_SAMPLES)?;
    let clean: Vec<WifiObservation> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let (px, pz) = wifi_plane_point((x, y), cfg);
            wifi_observe(px, pz, cfg.range_m)
        })
        .collect::<Result<_>>()?;
    let eta = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
    Ok((0..cfg.pairs)
        .map(|_| {
            clean
                .iter()
                .map(|o| {
                    let scale = if cfg.noise > 0.0 { 1.0 + eta.sample(rng) } else { 1.0 };
                    WifiObservation { r: o.r * scale, ..*o }
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccelRenderConfig {
    pub rate_hz: f64,
    /// Standard deviation of additive sensor noise, m/s².
    pub noise: f64,
}

impl Default for AccelRenderConfig {
    fn default() -> Self {
        AccelRenderConfig {
            rate_hz: ACCEL_RATE_HZ,
            noise: 0.05,
        }
    }
}

/// `3 × M` accelerometer trace: the path's planar acceleration on `X` and
/// `Z`, gravity on `Y`.
pub fn render_accel<R: Rng + ?Sized>(path: &Path, cfg: &AccelRenderConfig, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if !(cfg.rate_hz > 0.0 && cfg.noise >= 0.0) {
        return Err(Error::Config("accelerometer renderer needs a positive rate and non-negative noise".into()));
    }
    if path.points.len() < 3 {
        return Err(Error::InvalidInput("path too short to differentiate".into()));
    }
    let dt = 1.0 / path.rate_hz;
    let xs: Vec<f64> = path.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = path.points.iter().map(|p| p.1).collect();
    let ax = finite_difference(&xs, 2, dt)?;
    let az = finite_difference(&ys, 2, dt)?;
    let accel = Path {
        rate_hz: path.rate_hz,
        points: ax.into_iter().zip(az).collect(),
    };
    let m = (path.duration() * cfg.rate_hz).round() as usize;
    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut out = vec![Vec::with_capacity(m); 3];
    for k in 0..m {
        let a = accel.at(k as f64 / cfg.rate_hz);
        let mut jitter = || if cfg.noise > 0.0 { noise.sample(rng) } else { 0.0 };
        out[0].push(BODY_UNIT_M * a.0 + jitter());
        out[1].push(GRAVITY + jitter());
        out[2].push(BODY_UNIT_M * a.1 + jitter());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::features::{normalize_pose, wifi_coords, wifi_feature_matrix};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn circle_path(radius: f64, omega: f64, seconds: f64) -> Path {
        let n = (seconds * 100.0) as usize + 1;
        Path {
            rate_hz: 100.0,
            points: (0..n)
                .map(|k| {
                    let t = k as f64 / 100.0;
                    (radius * (omega * t).cos(), radius * (omega * t).sin())
                })
                .collect(),
        }
    }

    #[test]
    fn three_seconds_give_99_frames() {
        let path = circle_path(0.5, 2.0, 3.0);
        let frames = render_video(&path, &VideoRenderConfig::default(), &mut rng()).unwrap();
        assert_eq!(frames.len(), 99);
        for f in &frames {
            for kp in Keypoint::ALL {
                let c = f.get(kp).unwrap().conf;
                assert!((0.8..=1.0).contains(&c));
            }
        }
    }

    #[test]
    fn static_path_gives_stationary_wrists() {
        let path = Path { rate_hz: 100.0, points: vec![(0.3, -0.2); 201] };
        let cfg = VideoRenderConfig { keypoint_sigma: 0.0, ..Default::default() };
        let frames = render_video(&path, &cfg, &mut rng()).unwrap();
        for f in &frames {
            assert_eq!(f.get(Keypoint::RightWrist).map(|o| (o.x, o.y)), frames[0].get(Keypoint::RightWrist).map(|o| (o.x, o.y)));
            assert_eq!(f.get(Keypoint::LeftWrist).map(|o| (o.x, o.y)), frames[0].get(Keypoint::LeftWrist).map(|o| (o.x, o.y)));
        }
    }

    #[test]
    fn normalised_wrist_recovers_the_path() {
        let path = circle_path(0.6, 2.0, 3.0);
        let cfg = VideoRenderConfig { keypoint_sigma: 0.0, ..Default::default() };
        let frames = normalize_pose(&render_video(&path, &cfg, &mut rng()).unwrap()).unwrap();
        for (k, f) in frames.iter().enumerate() {
            let w = f.get(Keypoint::RightWrist).unwrap();
            let p = path.at(k as f64 / 33.0);
            assert!((w.x - (PATH_ANCHOR.0 + p.0)).abs() < 1e-12);
            assert!((w.y - (PATH_ANCHOR.1 - p.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn wifi_observation_inverts_the_geometry() {
        for &(x, z) in &[(0.5, 0.0), (1.2, 0.7), (1e-3, 2.0), (3.0, 1.5)] {
            let o = wifi_observe(x, z, 2.0).unwrap();
            let (bx, bz) = wifi_coords(&o).unwrap();
            assert!((bx - x).abs() < 1e-12 && (bz - z).abs() < 1e-12);
        }
        assert!(matches!(wifi_observe(0.0, 1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(wifi_observe(1.0, -0.1, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn path_outside_the_cone_is_rejected() {
        let path = Path { rate_hz: 100.0, points: vec![(-3.0, 0.0); 50] };
        assert!(matches!(render_wifi(&path, &WifiRenderConfig::default(), &mut rng()), Err(Error::Domain(_))));
    }

    #[test]
    fn averaged_pairs_recover_the_path() {
        let path = circle_path(0.8, 2.0, 3.0);
        let cfg = WifiRenderConfig::default();
        let obs = render_wifi(&path, &cfg, &mut rng()).unwrap();
        assert_eq!(obs.len(), 90);
        assert!(obs.iter().all(|p| p.len() == WIFI_SAMPLES));
        let m = wifi_feature_matrix(&obs).unwrap();
        let xs: Vec<f64> = path.points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = path.points.iter().map(|p| p.1).collect();
        let (xs, ys) = (resample(&xs, 200).unwrap(), resample(&ys, 200).unwrap());
        let bound = 3.0 * cfg.noise / 90f64.sqrt();
        let mut worst = 0.0f64;
        for t in 0..WIFI_SAMPLES {
            let (x, z) = wifi_plane_point((xs[t], ys[t]), &cfg);
            worst = worst.max(((m.get(0, t) - x) / x).abs()).max(((m.get(1, t) - z) / z).abs());
        }
        assert!(worst < 1.5 * bound, "worst relative error {worst} vs {bound}");
    }

    #[test]
    fn accel_length_gravity_and_centripetal_magnitude() {
        let (radius, omega) = (0.5, 3.0);
        let path = circle_path(radius, omega, 3.0);
        let cfg = AccelRenderConfig { noise: 0.0, ..Default::default() };
        let a = render_accel(&path, &cfg, &mut rng()).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].len(), 60);
        assert!(a[1].iter().all(|&g| g == GRAVITY));
        let expected = BODY_UNIT_M * radius * omega * omega;
        for k in 1..59 {
            let mag = a[0][k].hypot(a[2][k]);
            assert!((mag - expected).abs() / expected < 0.02);
        }
    }
}
