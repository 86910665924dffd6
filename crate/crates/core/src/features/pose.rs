//! Pose keypoint streams: body-relative normalisation, wrist movement
//! signatures and start/end location tokens.
//!
//! Coordinates follow image conventions (`y` grows downwards). After
//! [`normalize_pose`] the nose sits at the origin and one unit equals the
//! clip's median shoulder width.

use serde::{Deserialize, Serialize};

use super::calculus::{finite_difference, resample};
use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};

/// Longest run of missing frames that is filled by interpolation.
pub const MAX_GAP: usize = 3;
/// Fraction of frames in which a required keypoint must be present.
pub const MIN_PRESENCE: f64 = 0.8;
pub const DEFAULT_CANONICAL_FRAMES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keypoint {
    LeftWrist,
    RightWrist,
    Nose,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftEye,
    RightEye,
}

impl Keypoint {
    pub const ALL: [Keypoint; 9] = [
        Keypoint::LeftWrist,
        Keypoint::RightWrist,
        Keypoint::Nose,
        Keypoint::LeftShoulder,
        Keypoint::RightShoulder,
        Keypoint::LeftElbow,
        Keypoint::RightElbow,
        Keypoint::LeftEye,
        Keypoint::RightEye,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Keypoint::LeftWrist => "left_wrist",
            Keypoint::RightWrist => "right_wrist",
            Keypoint::Nose => "nose",
            Keypoint::LeftShoulder => "left_shoulder",
            Keypoint::RightShoulder => "right_shoulder",
            Keypoint::LeftElbow => "left_elbow",
            Keypoint::RightElbow => "right_elbow",
            Keypoint::LeftEye => "left_eye",
            Keypoint::RightEye => "right_eye",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointObs {
    pub x: f64,
    pub y: f64,
    pub conf: f64,
}

/// One video frame; absent keypoints are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KeypointFrame {
    points: [Option<KeypointObs>; 9],
}

impl KeypointFrame {
    pub fn get(&self, kp: Keypoint) -> Option<KeypointObs> {
        self.points[kp.index()]
    }

    pub fn set(&mut self, kp: Keypoint, obs: Option<KeypointObs>) {
        self.points[kp.index()] = obs;
    }

    pub fn with(mut self, kp: Keypoint, x: f64, y: f64, conf: f64) -> Self {
        self.set(kp, Some(KeypointObs { x, y, conf }));
        self
    }

    pub fn validate(&self, frame: usize) -> Result<()> {
        for kp in Keypoint::ALL {
            if let Some(o) = self.get(kp) {
                if !(0.0..=1.0).contains(&o.conf) {
                    return Err(Error::InvalidInput(format!(
                        "frame {frame}: {} confidence {} outside [0, 1]",
                        kp.name(),
                        o.conf
                    )));
                }
                if !(o.x.is_finite() && o.y.is_finite()) {
                    return Err(Error::InvalidInput(format!("frame {frame}: {} has non-finite coordinates", kp.name())));
                }
            }
        }
        Ok(())
    }

    /// Applies `(p - origin) / scale` to every present keypoint.
    fn transformed(&self, origin: (f64, f64), scale: f64) -> Self {
        let mut out = self.clone();
        for p in out.points.iter_mut().flatten() {
            p.x = (p.x - origin.0) / scale;
            p.y = (p.y - origin.1) / scale;
        }
        out
    }
}

/// Fills runs of missing samples by linear interpolation between the
/// neighbouring observations (or by holding the nearest one at the clip
/// edges). Any run longer than [`MAX_GAP`] is an error listing its frames.
pub fn fill_gaps(series: &[Option<(f64, f64)>], what: &str) -> Result<Vec<(f64, f64)>> {
    let present: Vec<usize> = (0..series.len()).filter(|&i| series[i].is_some()).collect();
    if present.is_empty() {
        return Err(Error::MissingKeypoints {
            frames: (0..series.len()).collect(),
            reason: format!("{what} never observed"),
        });
    }
    let mut out = Vec::with_capacity(series.len());
    let mut i = 0;
    while i < series.len() {
        if let Some(p) = series[i] {
            out.push(p);
            i += 1;
            continue;
        }
        let start = i;
        while i < series.len() && series[i].is_none() {
            i += 1;
        }
        if i - start > MAX_GAP {
            return Err(Error::MissingKeypoints {
                frames: (start..i).collect(),
                reason: format!("{what} missing for {} consecutive frames (at most {MAX_GAP} are interpolated)", i - start),
            });
        }
        let before = start.checked_sub(1).and_then(|b| series[b]);
        let after = series.get(i).copied().flatten();
        for k in start..i {
            out.push(match (before, after) {
                (Some(a), Some(b)) => {
                    let w = (k + 1 - start) as f64 / (i + 1 - start) as f64;
                    (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!("at least one frame is present"),
            });
        }
    }
    Ok(out)
}

fn track(frames: &[KeypointFrame], kp: Keypoint) -> Vec<Option<(f64, f64)>> {
    frames.iter().map(|f| f.get(kp).map(|o| (o.x, o.y))).collect()
}

fn require_presence(frames: &[KeypointFrame], kp: Keypoint) -> Result<Vec<(f64, f64)>> {
    let series = track(frames, kp);
    let missing: Vec<usize> = (0..series.len()).filter(|&i| series[i].is_none()).collect();
    let present = (frames.len() - missing.len()) as f64;
    if present < MIN_PRESENCE * frames.len() as f64 {
        return Err(Error::MissingKeypoints {
            frames: missing,
            reason: format!("{} present in fewer than {:.0}% of frames", kp.name(), MIN_PRESENCE * 100.0),
        });
    }
    fill_gaps(&series, kp.name())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Translates every frame so the nose is at the origin and divides by the
/// clip's median shoulder width.
pub fn normalize_pose(frames: &[KeypointFrame]) -> Result<Vec<KeypointFrame>> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("empty keypoint clip".into()));
    }
    for (i, f) in frames.iter().enumerate() {
        f.validate(i)?;
    }
    let nose = require_presence(frames, Keypoint::Nose)?;
    let left = require_presence(frames, Keypoint::LeftShoulder)?;
    let right = require_presence(frames, Keypoint::RightShoulder)?;
    let mut widths: Vec<f64> = left
        .iter()
        .zip(&right)
        .map(|(l, r)| ((l.0 - r.0).powi(2) + (l.1 - r.1).powi(2)).sqrt())
        .collect();
    let width = median(&mut widths);
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidInput(format!("median shoulder width {width} is not positive")));
    }
    Ok(frames
        .iter()
        .zip(&nose)
        .map(|(f, &origin)| f.transformed(origin, width))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementSignature {
    /// Rows: left wrist x, left wrist y, right wrist x, right wrist y.
    pub position: FeatureMatrix,
    pub velocity: FeatureMatrix,
    pub acceleration: FeatureMatrix,
}

/// Wrist trajectories of a normalised clip resampled to `canonical_n`
/// frames, with derivatives taken per canonical frame.
pub fn movement_signature(frames: &[KeypointFrame], canonical_n: usize) -> Result<MovementSignature> {
    if frames.len() < 4 {
        return Err(Error::InvalidInput(format!("movement signature needs at least 4 frames, got {}", frames.len())));
    }
    if canonical_n < 3 {
        return Err(Error::InvalidInput(format!("canonical frame count {canonical_n} is below 3")));
    }
    let mut rows = Vec::with_capacity(4);
    for kp in [Keypoint::LeftWrist, Keypoint::RightWrist] {
        let filled = require_presence(frames, kp)?;
        let xs: Vec<f64> = filled.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = filled.iter().map(|p| p.1).collect();
        for s in [xs, ys] {
            rows.push(if s.len() == canonical_n { s } else { resample(&s, canonical_n)? });
        }
    }
    let derive = |order: u8| -> Result<FeatureMatrix> {
        FeatureMatrix::from_rows(rows.iter().map(|r| finite_difference(r, order, 1.0)).collect::<Result<_>>()?)
    };
    let velocity = derive(1)?;
    let acceleration = derive(2)?;
    Ok(MovementSignature {
        position: FeatureMatrix::from_rows(rows)?,
        velocity,
        acceleration,
    })
}

/// Row boundaries of the body-zone grid, in normalised units below the nose.
pub const EYE_LINE: f64 = -0.2;
pub const SHOULDER_LINE: f64 = 0.6;
pub const TORSO_LINE: f64 = SHOULDER_LINE + 1.5;
/// Half width of the centre column.
pub const CENTER_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneRow {
    AboveEyes,
    EyesToShoulders,
    UpperTorso,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneColumn {
    Left,
    Center,
    Right,
}

/// One cell of the 3 × 4 body-zone grid. Columns are in image orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Zone {
    pub row: ZoneRow,
    pub column: ZoneColumn,
}

impl Zone {
    pub fn of(x: f64, y: f64) -> Zone {
        let column = if x < -CENTER_HALF_WIDTH {
            ZoneColumn::Left
        } else if x <= CENTER_HALF_WIDTH {
            ZoneColumn::Center
        } else {
            ZoneColumn::Right
        };
        let row = if y < EYE_LINE {
            ZoneRow::AboveEyes
        } else if y < SHOULDER_LINE {
            ZoneRow::EyesToShoulders
        } else if y < TORSO_LINE {
            ZoneRow::UpperTorso
        } else {
            ZoneRow::Lower
        };
        Zone { row, column }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationToken {
    pub hand: Hand,
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub start_zone: Zone,
    pub end_zone: Zone,
}

const BOUNDARY_WINDOW: usize = 3;

fn path_length(series: &[Option<(f64, f64)>]) -> f64 {
    series
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()),
            _ => None,
        })
        .sum()
}

/// Start and end location of the dominant wrist (the one travelling
/// further), each averaged over three boundary frames.
pub fn location_tokens(frames: &[KeypointFrame]) -> Result<LocationToken> {
    if frames.len() < BOUNDARY_WINDOW {
        return Err(Error::InvalidInput(format!("location tokens need at least {BOUNDARY_WINDOW} frames")));
    }
    let left = track(frames, Keypoint::LeftWrist);
    let right = track(frames, Keypoint::RightWrist);
    let (hand, series) = if path_length(&right) >= path_length(&left) {
        (Hand::Right, right)
    } else {
        (Hand::Left, left)
    };
    let n = frames.len();
    let window_mean = |range: std::ops::Range<usize>| -> Result<(f64, f64)> {
        let missing: Vec<usize> = range.clone().filter(|&i| series[i].is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::MissingKeypoints {
                frames: missing,
                reason: "dominant wrist missing in a boundary window".into(),
            });
        }
        let pts: Vec<(f64, f64)> = range.map(|i| series[i].expect("checked")).collect();
        let k = pts.len() as f64;
        Ok((pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k))
    };
    let start = window_mean(0..BOUNDARY_WINDOW)?;
    let end = window_mean(n - BOUNDARY_WINDOW..n)?;
    Ok(LocationToken {
        hand,
        start,
        end,
        start_zone: Zone::of(start.0, start.1),
        end_zone: Zone::of(end.0, end.1),
    })
}
