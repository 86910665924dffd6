//! Gesture trajectories built from turtle-style primitives.
//!
//! A trajectory starts at `start` with heading `heading` and walks through
//! its primitives, each beginning where (and in the direction) the previous
//! one ended, so the curve is C¹ by construction. Coordinates are normalised
//! body units with `y` pointing up.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PATH_RATE_HZ: f64 = 100.0;
pub const BOX_HALF_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Straight segment. An explicit absolute `heading` that differs from the
    /// current one breaks tangent continuity and is rejected.
    Line {
        length: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heading: Option<f64>,
    },
    /// Circular arc; positive `sweep` turns counter-clockwise.
    Arc { radius: f64, sweep: f64 },
    /// Full circle; `turns_left` selects the direction.
    Circle { radius: f64, turns_left: bool },
    /// Straight advance of `length` with a lateral sinusoid of `cycles`
    /// periods under a half-sine envelope, which keeps the end tangents
    /// aligned with the advance direction.
    Zigzag { length: f64, amplitude: f64, cycles: u32 },
    /// Two full circles of opposite direction touching at the start point.
    FigureEight { radius: f64, turns_left: bool },
}

impl Primitive {
    /// Length of the progress parameter along this primitive.
    pub fn extent(&self) -> f64 {
        match *self {
            Primitive::Line { length, .. } => length,
            Primitive::Arc { radius, sweep } => radius * sweep.abs(),
            Primitive::Circle { radius, .. } => radius * TAU,
            Primitive::Zigzag { length, .. } => length,
            Primitive::FigureEight { radius, .. } => 2.0 * radius * TAU,
        }
    }

    /// The same primitive with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Primitive {
        match *self {
            Primitive::Line { length, heading } => Primitive::Line { length: k * length, heading },
            Primitive::Arc { radius, sweep } => Primitive::Arc { radius: k * radius, sweep },
            Primitive::Circle { radius, turns_left } => Primitive::Circle { radius: k * radius, turns_left },
            Primitive::Zigzag { length, amplitude, cycles } => Primitive::Zigzag {
                length: k * length,
                amplitude: k * amplitude,
                cycles,
            },
            Primitive::FigureEight { radius, turns_left } => Primitive::FigureEight { radius: k * radius, turns_left },
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("primitive {index}: {what}")));
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Primitive::Line { length, .. } if !positive(length) => bad("line length must be positive"),
            Primitive::Arc { radius, sweep } if !positive(radius) || !positive(sweep.abs()) => {
                bad("arc needs a positive radius and a nonzero sweep")
            }
            Primitive::Circle { radius, .. } | Primitive::FigureEight { radius, .. } if !positive(radius) => {
                bad("radius must be positive")
            }
            Primitive::Zigzag { length, amplitude, cycles } if !positive(length) || !(amplitude >= 0.0) || cycles == 0 => {
                bad("zigzag needs positive length, non-negative amplitude and at least one cycle")
            }
            _ => Ok(()),
        }
    }

    /// Position and heading after progress `s` from `(p, h)`.
    fn eval(&self, p: (f64, f64), h: f64, s: f64) -> ((f64, f64), f64) {
        let dir = |a: f64| (a.cos(), a.sin());
        let turn = |p: (f64, f64), h: f64, radius: f64, sweep: f64| {
            let sign = sweep.signum();
            let c = (p.0 - sign * radius * h.sin(), p.1 + sign * radius * h.cos());
            let h1 = h + sweep;
            ((c.0 + sign * radius * h1.sin(), c.1 - sign * radius * h1.cos()), h1)
        };
        match *self {
            Primitive::Line { heading, .. } => {
                let h = heading.unwrap_or(h);
                let d = dir(h);
                ((p.0 + s * d.0, p.1 + s * d.1), h)
            }
            Primitive::Arc { radius, sweep } => turn(p, h, radius, sweep.signum() * s / radius),
            Primitive::Circle { radius, turns_left } => {
                let sign = if turns_left { 1.0 } else { -1.0 };
                turn(p, h, radius, sign * s / radius)
            }
            Primitive::FigureEight { radius, turns_left } => {
                let sign = if turns_left { 1.0 } else { -1.0 };
                let lap = radius * TAU;
                if s <= lap {
                    turn(p, h, radius, sign * s / radius)
                } else {
                    // after a full lap the turtle is back at p with heading h
                    turn(p, h, radius, -sign * (s - lap) / radius)
                }
            }
            Primitive::Zigzag { length, amplitude, cycles } => {
                let d = dir(h);
                let n = (-d.1, d.0);
                let u = s / length;
                let k = TAU * cycles as f64;
                let lat = amplitude * (k * u).sin() * (PI * u).sin();
                let dlat = amplitude * (k * (k * u).cos() * (PI * u).sin() + PI * (k * u).sin() * (PI * u).cos()) / length;
                let pos = (p.0 + s * d.0 + lat * n.0, p.1 + s * d.1 + lat * n.1);
                let tangent = (d.0 + dlat * n.0, d.1 + dlat * n.1);
                (pos, tangent.1.atan2(tangent.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub class_id: String,
    pub start: (f64, f64),
    pub heading: f64,
    pub primitives: Vec<Primitive>,
    /// Nominal duration in seconds at speed factor 1.
    pub duration: f64,
}

const CONTINUITY_TOL: f64 = 1e-9;

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

impl TrajectorySpec {
    pub fn total_extent(&self) -> f64 {
        self.primitives.iter().map(Primitive::extent).sum()
    }

    /// Start position and heading of every primitive.
    fn anchors(&self) -> Vec<((f64, f64), f64)> {
        let mut out = Vec::with_capacity(self.primitives.len());
        let (mut p, mut h) = (self.start, self.heading);
        for prim in &self.primitives {
            out.push((p, h));
            (p, h) = prim.eval(p, h, prim.extent());
        }
        out
    }

    /// Point at progress `s` in `[0, total_extent]`.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let mut rest = s.max(0.0);
        let anchors = self.anchors();
        for (i, prim) in self.primitives.iter().enumerate() {
            let e = prim.extent();
            if rest <= e || i + 1 == self.primitives.len() {
                return prim.eval(anchors[i].0, anchors[i].1, rest.min(e)).0;
            }
            rest -= e;
        }
        self.start
    }

    /// `n` points evenly spaced in progress.
    pub fn polyline(&self, n: usize) -> Vec<(f64, f64)> {
        let total = self.total_extent();
        (0..n).map(|i| self.point_at(total * i as f64 / (n - 1).max(1) as f64)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::Config(format!("trajectory {} has no primitives", self.class_id)));
        }
        if !(self.duration >= 1.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("trajectory {} lasts {} s (at least 1 s)", self.class_id, self.duration)));
        }
        let mut h = self.heading;
        let mut p = self.start;
        for (i, prim) in self.primitives.iter().enumerate() {
            prim.validate(i)?;
            if let Primitive::Line { heading: Some(explicit), .. } = prim {
                if angle_gap(*explicit, h) > CONTINUITY_TOL {
                    return Err(Error::Config(format!(
                        "trajectory {}: primitive {i} starts with heading {explicit:.4} but the path arrives at {h:.4}",
                        self.class_id
                    )));
                }
            }
            (p, h) = prim.eval(p, h, prim.extent());
        }
        let _ = p;
        if let Some(q) = self
            .polyline(400)
            .into_iter()
            .find(|q| q.0.abs() > BOX_HALF_WIDTH || q.1.abs() > BOX_HALF_WIDTH)
        {
            return Err(Error::Config(format!(
                "trajectory {} leaves the box [-{BOX_HALF_WIDTH}, {BOX_HALF_WIDTH}]^2 at ({:.3}, {:.3})",
                self.class_id, q.0, q.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    pub scale: f64,
    pub offset: (f64, f64),
    pub speed: f64,
    /// Standard deviation of smooth positional tremor, normalised units.
    pub sigma: f64,
    /// Bound on the random per-performance time warp, below `1 / pi`.
    #[serde(default)]
    pub tempo_jitter: f64,
}

impl UserProfile {
    pub fn identity(user_id: u32) -> Self {
        UserProfile {
            user_id,
            scale: 1.0,
            offset: (0.0, 0.0),
            speed: 1.0,
            sigma: 0.0,
            tempo_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.7..=1.3).contains(&self.scale) {
            return Err(Error::Config(format!("user {}: scale {} outside [0.7, 1.3]", self.user_id, self.scale)));
        }
        if !(0.8..=1.25).contains(&self.speed) {
            return Err(Error::Config(format!("user {}: speed {} outside [0.8, 1.25]", self.user_id, self.speed)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("user {}: sigma {} is negative", self.user_id, self.sigma)));
        }
        if !(0.0..1.0 / PI).contains(&self.tempo_jitter) {
            return Err(Error::Config(format!("user {}: tempo jitter {} outside [0, 1/pi)", self.user_id, self.tempo_jitter)));
        }
        Ok(())
    }
}

/// A planar path sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub rate_hz: f64,
    pub points: Vec<(f64, f64)>,
}

impl Path {
    pub fn duration(&self) -> f64 {
        (self.points.len().saturating_sub(1)) as f64 / self.rate_hz
    }

    /// Linear interpolation at time `t`, clamped to the path ends.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let x = (t * self.rate_hz).clamp(0.0, (self.points.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.points.len().saturating_sub(2));
        let w = x - i as f64;
        let (a, b) = (self.points[i], self.points[(i + 1).min(self.points.len() - 1)]);
        (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
    }
}

/// Quintic ease with zero velocity and acceleration at both ends.
pub fn smootherstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

const TREMOR_SMOOTHING: f64 = 4.0;

/// White noise smoothed by a Gaussian of `TREMOR_SMOOTHING` samples and
/// rescaled to unit variance.
fn smooth_noise<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let half = (3.0 * TREMOR_SMOOTHING).ceil() as isize;
    let taps: Vec<f64> = (-half..=half)
        .map(|k| (-(k * k) as f64 / (2.0 * TREMOR_SMOOTHING * TREMOR_SMOOTHING)).exp())
        .collect();
    let norm = taps.iter().map(|w| w * w).sum::<f64>().sqrt();
    let raw: Vec<f64> = (0..n as isize + 2 * half).map(|_| normal.sample(rng)).collect();
    (0..n)
        .map(|i| taps.iter().enumerate().map(|(k, w)| w * raw[i + k]).sum::<f64>() / norm)
        .collect()
}

/// Samples `spec` as performed by `user` at [`PATH_RATE_HZ`].
///
/// The nominal duration is divided by the user's speed factor, a random
/// monotone time warp bounded by `user.tempo_jitter` is applied, progress follows [`smootherstep`], the
/// user's scale and offset are applied and finally smooth tremor of standard
/// deviation `user.sigma` is added.
pub fn gen_trajectory<R: Rng + ?Sized>(spec: &TrajectorySpec, user: &UserProfile, rng: &mut R) -> Result<Path> {
    spec.validate()?;
    user.validate()?;
    let duration = spec.duration / user.speed;
    let n = (duration * PATH_RATE_HZ).round() as usize + 1;
    let warp = if user.tempo_jitter > 0.0 {
        rng.random_range(-user.tempo_jitter..=user.tempo_jitter)
    } else {
        0.0
    };
    let total = spec.total_extent();
    let noise_x = smooth_noise(n, rng);
    let noise_y = smooth_noise(n, rng);
    let points = (0..n)
        .map(|k| {
            let u = k as f64 / (n - 1) as f64;
            // monotone for |warp| < 1 / pi
            let warped = u + warp * (PI * u).sin() / PI;
            let (x, y) = spec.point_at(total * smootherstep(warped));
            (
                user.scale * x + user.offset.0 + user.sigma * noise_x[k],
                user.scale * y + user.offset.1 + user.sigma * noise_y[k],
            )
        })
        .collect();
    Ok(Path {
        rate_hz: PATH_RATE_HZ,
        points,
    })
}

/// Discrete Fréchet distance between two polylines.
pub fn frechet_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let d = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, &p) in a.iter().enumerate() {
        for j in 0..m {
            let c = d(p, b[j]);
            cur[j] = match (i, j) {
                (0, 0) => c,
                (0, _) => cur[j - 1].max(c),
                (_, 0) => prev[0].max(c),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(c),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn spec(primitives: Vec<Primitive>) -> TrajectorySpec {
        TrajectorySpec {
            class_id: "t".into(),
            start: (-0.5, 0.5),
            heading: 0.0,
            primitives,
            duration: 3.0,
        }
    }

    #[test]
    fn noiseless_identity_user_follows_the_curve() {
        let s = spec(vec![
            Primitive::Line { length: 0.8, heading: None },
            Primitive::Arc { radius: 0.4, sweep: -2.0 },
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = gen_trajectory(&s, &UserProfile::identity(0), &mut rng).unwrap();
        assert_eq!(path.points.len(), 301);
        let total = s.total_extent();
        for (k, p) in path.points.iter().enumerate() {
            let q = s.point_at(total * smootherstep(k as f64 / 300.0));
            assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
        }
        let end = s.point_at(total);
        let last = path.points.last().unwrap();
        assert!((last.0 - end.0).abs() < 1e-12 && (last.1 - end.1).abs() < 1e-12);
    }

    #[test]
    fn line_is_exact() {
        let s = spec(vec![Primitive::Line { length: 1.0, heading: None }]);
        for k in 0..=10 {
            let p = s.point_at(k as f64 / 10.0);
            assert!((p.0 - (-0.5 + k as f64 / 10.0)).abs() < 1e-12 && (p.1 - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_keeps_its_radius() {
        let s = TrajectorySpec {
            start: (0.0, -0.5),
            ..spec(vec![Primitive::Circle { radius: 0.5, turns_left: true }])
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let user = UserProfile { sigma: 0.01, ..UserProfile::identity(0) };
        let path = gen_trajectory(&s, &user, &mut rng).unwrap();
        // centre of a left turn from heading 0 at (0, -0.5) is the origin
        for p in &path.points {
            let r = (p.0 * p.0 + p.1 * p.1).sqrt();
            assert!((r - 0.5).abs() < 6.0 * 0.01 * std::f64::consts::SQRT_2);
        }
        let exact = s.polyline(50);
        for p in exact {
            assert!(((p.0 * p.0 + p.1 * p.1).sqrt() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn primitive_joins_are_tangent_continuous() {
        let s = spec(vec![
            Primitive::Zigzag { length: 0.8, amplitude: 0.2, cycles: 2 },
            Primitive::Arc { radius: 0.3, sweep: 1.5 },
            Primitive::FigureEight { radius: 0.2, turns_left: false },
            Primitive::Line { length: 0.3, heading: None },
        ]);
        s.validate().unwrap();
        let total = s.total_extent();
        let h = 1e-6;
        let mut acc = 0.0;
        for prim in &s.primitives[..s.primitives.len() - 1] {
            acc += prim.extent();
            let before = s.point_at(acc - h);
            let at = s.point_at(acc);
            let after = s.point_at(acc + h);
            let t1 = ((at.0 - before.0) / h, (at.1 - before.1) / h);
            let t2 = ((after.0 - at.0) / h, (after.1 - at.1) / h);
            let n1 = t1.0.hypot(t1.1);
            let n2 = t2.0.hypot(t2.1);
            assert!(angle_gap(t1.1.atan2(t1.0), t2.1.atan2(t2.0)) < 1e-4, "join at {acc} of {total}");
            assert!(n1 > 0.5 && n2 > 0.5);
        }
    }

    #[test]
    fn discontinuous_heading_is_rejected() {
        let s = spec(vec![
            Primitive::Line { length: 0.5, heading: None },
            Primitive::Line { length: 0.5, heading: Some(1.0) },
        ]);
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let ok = spec(vec![
            Primitive::Line { length: 0.5, heading: None },
            Primitive::Line { length: 0.5, heading: Some(TAU) },
        ]);
        ok.validate().unwrap();
    }

    #[test]
    fn box_and_parameter_checks() {
        assert!(spec(vec![Primitive::Line { length: 5.0, heading: None }]).validate().is_err());
        assert!(spec(vec![Primitive::Arc { radius: 0.0, sweep: 1.0 }]).validate().is_err());
        let short = TrajectorySpec { duration: 0.5, ..spec(vec![Primitive::Line { length: 0.5, heading: None }]) };
        assert!(short.validate().is_err());
        assert!(UserProfile { scale: 1.4, ..UserProfile::identity(0) }.validate().is_err());
        assert!(UserProfile { speed: 0.7, ..UserProfile::identity(0) }.validate().is_err());
        assert!(UserProfile { sigma: -0.1, ..UserProfile::identity(0) }.validate().is_err());
    }

    #[test]
    fn same_seed_same_path() {
        let s = spec(vec![Primitive::Zigzag { length: 1.0, amplitude: 0.2, cycles: 3 }]);
        let user = UserProfile { sigma: 0.02, scale: 1.1, speed: 1.2, offset: (0.1, -0.1), user_id: 2, tempo_jitter: 0.1 };
        let a = gen_trajectory(&s, &user, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = gen_trajectory(&s, &user, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 251);
    }

    #[test]
    fn frechet_basics() {
        let a = vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)];
        let b: Vec<(f64, f64)> = a.iter().map(|p| (p.0, p.1 + 0.3)).collect();
        assert!((frechet_distance(&a, &b) - 0.3).abs() < 1e-12);
        assert_eq!(frechet_distance(&a, &a), 0.0);
        let rev: Vec<(f64, f64)> = a.iter().rev().copied().collect();
        assert!((frechet_distance(&a, &rev) - 2.0).abs() < 1e-12);
    }
}
