//! Synthetic multi-modal gesture data: random gesture classes, simulated
//! users, and renderers producing video keypoints, WiFi angle-of-arrival
//! series and accelerometer traces from one shared wrist path.

pub mod dataset;
pub mod render;
pub mod trajectory;

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use dataset::{read_observation, GestureDataset, Instance, Modality, Observation};
pub use render::{
    render_accel, render_video, render_wifi, wifi_observe, AccelRenderConfig, VideoRenderConfig, WifiRenderConfig,
    BODY_UNIT_M, GRAVITY,
};
pub use trajectory::{frechet_distance, gen_trajectory, smootherstep, Path, Primitive, TrajectorySpec, UserProfile};

use crate::error::{Error, Result};
use crate::seed::SeedLineage;

/// Largest coordinate magnitude of a generated class shape.
pub const CLASS_EXTENT: f64 = 1.5;
/// Minimum pairwise Fréchet distance enforced between generated classes.
pub const MIN_CLASS_SEPARATION: f64 = 0.3;
const SEPARATION_SAMPLES: usize = 100;

fn random_primitive<R: Rng + ?Sized>(rng: &mut R) -> Primitive {
    let side = |rng: &mut R| rng.random_bool(0.5);
    match rng.random_range(0..5) {
        0 => Primitive::Line { length: rng.random_range(0.5..1.5), heading: None },
        1 => {
            let sweep = rng.random_range(0.5 * PI..1.5 * PI);
            Primitive::Arc { radius: rng.random_range(0.3..0.8), sweep: if side(rng) { sweep } else { -sweep } }
        }
        2 => Primitive::Circle { radius: rng.random_range(0.3..0.6), turns_left: side(rng) },
        3 => Primitive::Zigzag {
            length: rng.random_range(0.8..1.6),
            amplitude: rng.random_range(0.1..0.3),
            cycles: rng.random_range(1..4),
        },
        _ => Primitive::FigureEight { radius: rng.random_range(0.25..0.45), turns_left: side(rng) },
    }
}

/// A random gesture class: a downward approach stroke followed by one to
/// three random primitives, centred and shrunk to fit [`CLASS_EXTENT`].
pub fn random_class<R: Rng + ?Sized>(class_id: &str, rng: &mut R) -> TrajectorySpec {
    let mut primitives = vec![Primitive::Line { length: 1.0, heading: None }];
    for _ in 0..rng.random_range(1..4) {
        primitives.push(random_primitive(rng));
    }
    let mut spec = TrajectorySpec {
        class_id: class_id.to_string(),
        start: (0.0, 0.0),
        heading: -FRAC_PI_2 + rng.random_range(-0.5..0.5),
        primitives,
        duration: rng.random_range(2.5..3.5),
    };
    let pts = spec.polyline(400);
    let n = pts.len() as f64;
    let centre = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let reach = pts
        .iter()
        .fold(0.0f64, |m, p| m.max((p.0 - centre.0).abs()).max((p.1 - centre.1).abs()));
    let k = if reach > CLASS_EXTENT { CLASS_EXTENT / reach } else { 1.0 };
    spec.primitives = spec.primitives.iter().map(|p| p.scaled(k)).collect();
    spec.start = (-k * centre.0, -k * centre.1);
    spec
}

/// `n` classes named `g00`, `g01`, ... whose noiseless shapes are pairwise
/// at least [`MIN_CLASS_SEPARATION`] apart in Fréchet distance.
pub fn random_classes<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<TrajectorySpec>> {
    let mut classes: Vec<TrajectorySpec> = Vec::with_capacity(n);
    let mut shapes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n);
    let mut attempts = 0;
    while classes.len() < n {
        attempts += 1;
        if attempts > 100 * n.max(1) {
            return Err(Error::Config(format!("could not draw {n} separable gesture classes")));
        }
        let spec = random_class(&format!("g{:02}", classes.len()), rng);
        spec.validate()?;
        let shape = spec.polyline(SEPARATION_SAMPLES);
        if shapes.iter().all(|s| frechet_distance(s, &shape) > MIN_CLASS_SEPARATION) {
            classes.push(spec);
            shapes.push(shape);
        }
    }
    Ok(classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserPopulation {
    pub scale: (f64, f64),
    pub offset_sigma: f64,
    pub speed: (f64, f64),
    pub sigma: f64,
    pub tempo_jitter: f64,
}

impl Default for UserPopulation {
    fn default() -> Self {
        UserPopulation {
            scale: (0.8, 1.2),
            offset_sigma: 0.1,
            speed: (0.85, 1.15),
            sigma: 0.01,
            tempo_jitter: 0.1,
        }
    }
}

impl UserPopulation {
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, first_id: u32, rng: &mut R) -> Result<Vec<UserProfile>> {
        let offset = Normal::new(0.0, self.offset_sigma.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Config(format!("user offset spread: {e}")))?;
        (0..n)
            .map(|i| {
                let u = UserProfile {
                    user_id: first_id + i as u32,
                    scale: rng.random_range(self.scale.0..=self.scale.1),
                    offset: if self.offset_sigma > 0.0 { (offset.sample(rng), offset.sample(rng)) } else { (0.0, 0.0) },
                    speed: rng.random_range(self.speed.0..=self.speed.1),
                    sigma: self.sigma,
                    tempo_jitter: self.tempo_jitter,
                };
                u.validate()?;
                Ok(u)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub video: VideoRenderConfig,
    pub wifi: WifiRenderConfig,
    pub accel: AccelRenderConfig,
}

/// Renders one path in the requested modality.
pub fn render<R: Rng + ?Sized>(modality: Modality, path: &Path, cfg: &RenderConfig, rng: &mut R) -> Result<Observation> {
    Ok(match modality {
        Modality::Video => Observation::Video(render_video(path, &cfg.video, rng)?),
        Modality::Wifi => Observation::Wifi(render_wifi(path, &cfg.wifi, rng)?),
        Modality::Accel => Observation::Accel(render_accel(path, &cfg.accel, rng)?),
    })
}

/// Identifier of the `rep`-th performance of `class` in `modality`.
pub fn instance_id(modality: Modality, class: &str, rep: usize) -> String {
    format!("{modality}-{class}-{rep:03}")
}

/// `reps` performances of every class in `classes`, users assigned round
/// robin. Each instance draws from its own stream derived from `seed` and
/// its id, so any subset can be regenerated independently.
pub fn synthesize(
    modality: Modality,
    classes: &[TrajectorySpec],
    users: &[UserProfile],
    reps: usize,
    render_cfg: &RenderConfig,
    seed: &SeedLineage,
) -> Result<GestureDataset> {
    if users.is_empty() {
        return Err(Error::Config("at least one user is required".into()));
    }
    let mut instances = Vec::with_capacity(classes.len() * reps);
    for class in classes {
        for rep in 0..reps {
            let id = instance_id(modality, &class.class_id, rep);
            let user = &users[rep % users.len()];
            let mut rng = seed.child(&id).rng();
            let path = gen_trajectory(class, user, &mut rng)?;
            let data = render(modality, &path, render_cfg, &mut rng).map_err(|e| Error::Dataset {
                instance: id.clone(),
                reason: e.to_string(),
            })?;
            instances.push(Instance {
                id,
                class: class.class_id.clone(),
                user: user.user_id,
                data,
            });
        }
    }
    GestureDataset::new(modality, instances)
}
