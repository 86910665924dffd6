use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order in which a multi-channel matrix is laid out as one flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// All samples of channel 0, then all of channel 1, ...
    ChannelMajor,
    /// The channel values of sample 0, then of sample 1, ...
    #[default]
    TimeMajor,
}

/// A `channels × len` real matrix stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    channels: usize,
    len: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(channels: usize, len: usize) -> Self {
        FeatureMatrix {
            channels,
            len,
            data: vec![0.0; channels * len],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let channels = rows.len();
        let len = rows.first().map(Vec::len).unwrap_or(0);
        if channels == 0 || len == 0 {
            return Err(Error::InvalidInput("feature matrix needs at least one channel and one sample".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != len) {
            return Err(Error::shape(len, r.len(), "feature matrix row"));
        }
        Ok(FeatureMatrix {
            channels,
            len,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.len)
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.len)
    }

    pub fn get(&self, c: usize, t: usize) -> f64 {
        self.data[c * self.len + t]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_shape(&self, channels: usize, len: usize, what: &str) -> Result<()> {
        if self.channels != channels {
            return Err(Error::shape(channels, self.channels, format!("{what} channels")));
        }
        if self.len != len {
            return Err(Error::shape(len, self.len, format!("{what} samples")));
        }
        Ok(())
    }

    pub fn flatten(&self, layout: Layout) -> Vec<f64> {
        match layout {
            Layout::ChannelMajor => self.data.clone(),
            Layout::TimeMajor => (0..self.len)
                .flat_map(|t| (0..self.channels).map(move |c| (c, t)))
                .map(|(c, t)| self.get(c, t))
                .collect(),
        }
    }

    pub fn unflatten(flat: &[f64], channels: usize, len: usize, layout: Layout) -> Result<Self> {
        if channels * len != flat.len() || channels == 0 {
            return Err(Error::shape(channels * len, flat.len(), "flattened feature matrix"));
        }
        let data = match layout {
            Layout::ChannelMajor => flat.to_vec(),
            Layout::TimeMajor => (0..channels)
                .flat_map(|c| (0..len).map(move |t| flat[t * channels + c]))
                .collect(),
        };
        Ok(FeatureMatrix { channels, len, data })
    }
}

/// Affine map of every feature value onto `[0, 1]`, fitted as one joint
/// range per modality. Values outside the fitted range are clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub lo: f64,
    pub hi: f64,
}

impl MinMax {
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in matrices {
            for &v in m.values() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput("non-finite feature value".into()));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if lo > hi {
            return Err(Error::InvalidInput("cannot fit normalisation on no data".into()));
        }
        Ok(MinMax { lo, hi })
    }

    pub fn apply(&self, m: &FeatureMatrix) -> FeatureMatrix {
        let span = (self.hi - self.lo).max(1e-12);
        let mut out = m.clone();
        out.values_mut()
            .iter_mut()
            .for_each(|v| *v = ((*v - self.lo) / span).clamp(0.0, 1.0));
        out
    }
}
