//! In-memory gesture datasets and their on-disk layout: a `manifest.csv`
//! with columns `instance_id,class,user,file` next to one CSV per instance.
//! The instance file's header tells its modality.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Keypoint, KeypointFrame, KeypointObs, WifiObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Wifi,
    Accel,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Wifi => "wifi",
            Modality::Accel => "accel",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(Modality::Video),
            "wifi" => Ok(Modality::Wifi),
            "accel" => Ok(Modality::Accel),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Video(Vec<KeypointFrame>),
    /// One series per antenna pair.
    Wifi(Vec<Vec<WifiObservation>>),
    /// Channels X, Y, Z.
    Accel(Vec<Vec<f64>>),
}

impl Observation {
    pub fn modality(&self) -> Modality {
        match self {
            Observation::Video(_) => Modality::Video,
            Observation::Wifi(_) => Modality::Wifi,
            Observation::Accel(_) => Modality::Accel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub class: String,
    pub user: u32,
    pub data: Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureDataset {
    pub modality: Modality,
    pub instances: Vec<Instance>,
}

impl GestureDataset {
    pub fn new(modality: Modality, instances: Vec<Instance>) -> Result<Self> {
        for inst in &instances {
            if inst.data.modality() != modality {
                return Err(Error::Dataset {
                    instance: inst.id.clone(),
                    reason: format!("{} data in a {modality} dataset", inst.data.modality()),
                });
            }
        }
        Ok(GestureDataset { modality, instances })
    }

    /// Sorted distinct class ids.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.instances.iter().map(|i| i.class.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn save(&self, dir: impl AsRef<FsPath>) -> Result<()> {
        let dir = dir.as_ref();
        let files = dir.join("instances");
        fs::create_dir_all(&files).map_err(|e| Error::io(&files, e))?;
        let manifest_path = dir.join("manifest.csv");
        let mut manifest = csv::Writer::from_path(&manifest_path)?;
        manifest.write_record(["instance_id", "class", "user", "file"])?;
        for inst in &self.instances {
            let rel = format!("instances/{}.csv", inst.id);
            manifest.write_record([inst.id.as_str(), inst.class.as_str(), &inst.user.to_string(), &rel])?;
            let path = dir.join(&rel);
            let mut w = csv::Writer::from_path(&path)?;
            write_observation(&mut w, &inst.data)?;
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        manifest.flush().map_err(|e| Error::io(&manifest_path, e))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<FsPath>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.csv");
        let file = manifest_path.display().to_string();
        let mut reader = csv::Reader::from_path(&manifest_path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Dataset {
                instance: "<manifest>".into(),
                reason: format!("cannot open {file}"),
            },
            _ => Error::Csv(e),
        })?;
        expect_header(&mut reader, &file, &["instance_id", "class", "user", "file"])?;
        let mut instances = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let id = rec[0].to_string();
            let user = rec[2].parse().map_err(|_| Error::Schema {
                file: file.clone(),
                row: row + 1,
                column: "user".into(),
                reason: format!("`{}` is not a user number", &rec[2]),
            })?;
            let path = dir.join(&rec[3]);
            if !path.is_file() {
                return Err(Error::Dataset {
                    instance: id,
                    reason: format!("missing file {}", path.display()),
                });
            }
            let data = read_observation(&path).map_err(|e| match e {
                Error::Schema { .. } => e,
                other => Error::Dataset {
                    instance: id.clone(),
                    reason: other.to_string(),
                },
            })?;
            instances.push(Instance {
                id,
                class: rec[1].to_string(),
                user,
                data,
            });
        }
        let modality = instances
            .first()
            .map(|i| i.data.modality())
            .ok_or_else(|| Error::Dataset {
                instance: "<manifest>".into(),
                reason: "manifest lists no instances".into(),
            })?;
        GestureDataset::new(modality, instances)
    }
}

fn expect_header<R: std::io::Read>(reader: &mut csv::Reader<R>, file: &str, want: &[&str]) -> Result<()> {
    let header = reader.headers()?.clone();
    for (i, w) in want.iter().enumerate() {
        if header.get(i) != Some(*w) {
            return Err(Error::Schema {
                file: file.into(),
                row: 0,
                column: w.to_string(),
                reason: format!("expected column `{w}` at position {i}, found {:?}", header.get(i)),
            });
        }
    }
    if header.len() != want.len() {
        return Err(Error::Schema {
            file: file.into(),
            row: 0,
            column: header.get(want.len()).unwrap_or("").into(),
            reason: format!("expected {} columns, found {}", want.len(), header.len()),
        });
    }
    Ok(())
}

fn keypoint_header() -> Vec<String> {
    let mut h = vec!["frame".to_string()];
    for kp in Keypoint::ALL {
        for s in ["x", "y", "conf"] {
            h.push(format!("{}_{s}", kp.name()));
        }
    }
    h
}

const WIFI_HEADER: [&str; 6] = ["pair", "sample", "r", "alpha_z", "el", "angle_unit"];
const ACCEL_HEADER: [&str; 4] = ["t", "ax", "ay", "az"];
const ACCEL_RATE: f64 = crate::features::ACCEL_RATE_HZ;

fn write_observation<W: std::io::Write>(w: &mut csv::Writer<W>, data: &Observation) -> Result<()> {
    match data {
        Observation::Video(frames) => {
            w.write_record(keypoint_header())?;
            for (i, f) in frames.iter().enumerate() {
                let mut rec = vec![i.to_string()];
                for kp in Keypoint::ALL {
                    match f.get(kp) {
                        Some(o) => rec.extend([o.x.to_string(), o.y.to_string(), o.conf.to_string()]),
                        None => rec.extend([String::new(), String::new(), String::new()]),
                    }
                }
                w.write_record(rec)?;
            }
        }
        Observation::Wifi(pairs) => {
            w.write_record(WIFI_HEADER)?;
            for (p, series) in pairs.iter().enumerate() {
                for (s, o) in series.iter().enumerate() {
                    w.write_record([
                        p.to_string(),
                        s.to_string(),
                        o.r.to_string(),
                        o.alpha_z.to_string(),
                        o.el.to_string(),
                        "rad".into(),
                    ])?;
                }
            }
        }
        Observation::Accel(ch) => {
            w.write_record(ACCEL_HEADER)?;
            let m = ch.first().map_or(0, Vec::len);
            for k in 0..m {
                w.write_record([
                    (k as f64 / ACCEL_RATE).to_string(),
                    ch[0][k].to_string(),
                    ch[1][k].to_string(),
                    ch[2][k].to_string(),
                ])?;
            }
        }
    }
    Ok(())
}

struct Cells<'a> {
    file: &'a str,
    row: usize,
    header: &'a csv::StringRecord,
    rec: &'a csv::StringRecord,
}

impl Cells<'_> {
    fn err(&self, col: usize, reason: String) -> Error {
        Error::Schema {
            file: self.file.into(),
            row: self.row,
            column: self.header.get(col).unwrap_or("?").into(),
            reason,
        }
    }

    fn raw(&self, col: usize) -> &str {
        self.rec.get(col).unwrap_or("").trim()
    }

    fn float(&self, col: usize) -> Result<f64> {
        let s = self.raw(col);
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(col, format!("`{s}` is not a finite number"))),
        }
    }

    fn index(&self, col: usize) -> Result<usize> {
        let s = self.raw(col);
        s.parse().map_err(|_| self.err(col, format!("`{s}` is not an index")))
    }
}

/// Reads one instance file, dispatching on its header.
pub fn read_observation(path: &FsPath) -> Result<Observation> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let header = reader.headers()?.clone();
    let first = header.get(0).unwrap_or("");
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    let cells = |row: usize| Cells {
        file: &file,
        row: row + 1,
        header: &header,
        rec: &records[row],
    };
    match first {
        "frame" => {
            let want = keypoint_header();
            let mut r = csv::Reader::from_path(path)?;
            expect_header(&mut r, &file, &want.iter().map(String::as_str).collect::<Vec<_>>())?;
            let mut frames = Vec::with_capacity(records.len());
            for row in 0..records.len() {
                let c = cells(row);
                if c.index(0)? != row {
                    return Err(c.err(0, format!("frames must be numbered 0, 1, ... in order, expected {row}")));
                }
                let mut f = KeypointFrame::default();
                for (k, kp) in Keypoint::ALL.into_iter().enumerate() {
                    let col = 1 + 3 * k;
                    let blank = (col..col + 3).filter(|&i| c.raw(i).is_empty()).count();
                    match blank {
                        3 => {}
                        0 => {
                            let obs = KeypointObs {
                                x: c.float(col)?,
                                y: c.float(col + 1)?,
                                conf: c.float(col + 2)?,
                            };
                            if !(0.0..=1.0).contains(&obs.conf) {
                                return Err(c.err(col + 2, format!("confidence {} outside [0, 1]", obs.conf)));
                            }
                            f.set(kp, Some(obs));
                        }
                        _ => return Err(c.err(col, format!("{} is partially missing", kp.name()))),
                    }
                }
                frames.push(f);
            }
            Ok(Observation::Video(frames))
        }
        "pair" => {
            let mut r = csv::Reader::from_path(path)?;
            expect_header(&mut r, &file, &WIFI_HEADER)?;
            let mut pairs: BTreeMap<usize, BTreeMap<usize, WifiObservation>> = BTreeMap::new();
            for row in 0..records.len() {
                let c = cells(row);
                let (p, s) = (c.index(0)?, c.index(1)?);
                let to_rad = match c.raw(5) {
                    "rad" => 1.0,
                    "deg" => std::f64::consts::PI / 180.0,
                    other => return Err(c.err(5, format!("unknown angle unit `{other}` (rad or deg)"))),
                };
                let obs = WifiObservation {
                    r: c.float(2)?,
                    alpha_z: c.float(3)? * to_rad,
                    el: c.float(4)? * to_rad,
                };
                if pairs.entry(p).or_default().insert(s, obs).is_some() {
                    return Err(c.err(1, format!("duplicate sample {s} for pair {p}")));
                }
            }
            let mut out = Vec::with_capacity(pairs.len());
            for (i, (p, series)) in pairs.into_iter().enumerate() {
                if p != i || series.keys().enumerate().any(|(j, &s)| s != j) {
                    return Err(Error::Schema {
                        file: file.clone(),
                        row: 0,
                        column: "sample".into(),
                        reason: format!("pair {p}: pairs and samples must be numbered contiguously from 0"),
                    });
                }
                out.push(series.into_values().collect());
            }
            Ok(Observation::Wifi(out))
        }
        "t" => {
            let mut r = csv::Reader::from_path(path)?;
            expect_header(&mut r, &file, &ACCEL_HEADER)?;
            let mut ch = vec![Vec::with_capacity(records.len()); 3];
            let mut last = f64::NEG_INFINITY;
            for row in 0..records.len() {
                let c = cells(row);
                let t = c.float(0)?;
                if t <= last {
                    return Err(c.err(0, format!("time {t} does not increase")));
                }
                last = t;
                for (k, v) in ch.iter_mut().enumerate() {
                    v.push(c.float(1 + k)?);
                }
            }
            Ok(Observation::Accel(ch))
        }
        other => Err(Error::Schema {
            file,
            row: 0,
            column: other.into(),
            reason: "unrecognised instance file (first column must be frame, pair or t)".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset() -> GestureDataset {
        let frame = KeypointFrame::default()
            .with(Keypoint::Nose, 320.0, 120.0, 0.9)
            .with(Keypoint::RightWrist, 0.1 + 0.2, 1.0 / 3.0, 1.0);
        GestureDataset::new(
            Modality::Video,
            vec![
                Instance { id: "a".into(), class: "c1".into(), user: 3, data: Observation::Video(vec![frame.clone(), frame]) },
                Instance { id: "b".into(), class: "c0".into(), user: 1, data: Observation::Video(vec![KeypointFrame::default()]) },
            ],
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample_dataset();
        ds.save(dir.path()).unwrap();
        assert_eq!(GestureDataset::load(dir.path()).unwrap(), ds);
        assert_eq!(ds.classes(), vec!["c0", "c1"]);

        let wifi = GestureDataset::new(
            Modality::Wifi,
            vec![Instance {
                id: "w".into(),
                class: "c".into(),
                user: 0,
                data: Observation::Wifi(vec![vec![WifiObservation { r: 2.1, alpha_z: 0.3, el: 0.2 }; 3]; 2]),
            }],
        )
        .unwrap();
        let d2 = tempfile::tempdir().unwrap();
        wifi.save(d2.path()).unwrap();
        assert_eq!(GestureDataset::load(d2.path()).unwrap(), wifi);

        let accel = GestureDataset::new(
            Modality::Accel,
            vec![Instance { id: "x".into(), class: "c".into(), user: 0, data: Observation::Accel(vec![vec![0.1, 0.2], vec![9.81, 9.8], vec![-0.3, 1e-17]]) }],
        )
        .unwrap();
        let d3 = tempfile::tempdir().unwrap();
        accel.save(d3.path()).unwrap();
        assert_eq!(GestureDataset::load(d3.path()).unwrap(), accel);
    }

    #[test]
    fn missing_file_names_the_instance() {
        let dir = tempfile::tempdir().unwrap();
        sample_dataset().save(dir.path()).unwrap();
        fs::remove_file(dir.path().join("instances/b.csv")).unwrap();
        match GestureDataset::load(dir.path()) {
            Err(Error::Dataset { instance, .. }) => assert_eq!(instance, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_angle_units_are_normalised() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        fs::write(&path, "pair,sample,r,alpha_z,el,angle_unit\n0,0,2,30,10,deg\n0,1,2,0.5,0.1,rad\n").unwrap();
        let Observation::Wifi(p) = read_observation(&path).unwrap() else { panic!() };
        assert!((p[0][0].alpha_z - 30f64.to_radians()).abs() < 1e-15);
        assert!((p[0][0].el - 10f64.to_radians()).abs() < 1e-15);
        assert_eq!(p[0][1].alpha_z, 0.5);
    }

    #[test]
    fn schema_errors_point_at_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        fs::write(&path, "t,ax,ay,az\n0,1,2,3\n0.05,1,oops,3\n").unwrap();
        match read_observation(&path) {
            Err(Error::Schema { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "ay")),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "pair,sample,r,alpha_z,el,angle_unit\n0,0,2,30,10,grad\n").unwrap();
        assert!(matches!(read_observation(&path), Err(Error::Schema { .. })));
        fs::write(&path, "t,ax,ay\n0,1,2\n").unwrap();
        assert!(matches!(read_observation(&path), Err(Error::Schema { .. })));
    }

    #[test]
    fn mixed_modalities_are_rejected() {
        let err = GestureDataset::new(
            Modality::Accel,
            vec![Instance { id: "v".into(), class: "c".into(), user: 0, data: Observation::Video(vec![]) }],
        );
        assert!(matches!(err, Err(Error::Dataset { .. })));
    }
}
