//! Finite differences, cubic-spline resampling and accelerometer
//! double integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derivative estimate with second-order accuracy everywhere: central
/// differences inside, three-point one-sided stencils at both ends.
/// `order == 2` applies the first-order operator twice.
pub fn finite_difference(series: &[f64], order: u8, dt: f64) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "finite difference needs at least 3 samples, got {}",
            series.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    match order {
        1 => Ok(first_difference(series, dt)),
        2 => Ok(first_difference(&first_difference(series, dt), dt)),
        _ => Err(Error::InvalidInput(format!("finite difference order must be 1 or 2, got {order}"))),
    }
}

fn first_difference(s: &[f64], dt: f64) -> Vec<f64> {
    let n = s.len();
    let h2 = 2.0 * dt;
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * s[0] + 4.0 * s[1] - s[2]) / h2
            } else if i == n - 1 {
                (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / h2
            } else {
                (s[i + 1] - s[i - 1]) / h2
            }
        })
        .collect()
}

/// Second derivatives at the knots of a not-a-knot cubic spline through
/// `y` on the unit-spaced grid `0, 1, ..., n-1`.
fn spline_moments(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let rhs: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                0.0
            } else {
                6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1])
            }
        })
        .collect();
    let mut m = vec![0.0; n];
    // With uniform spacing the not-a-knot conditions M0 = 2 M1 - M2 and
    // M[n-1] = 2 M[n-2] - M[n-3] turn the first and last interior rows into
    // 6 M1 = rhs1 and 6 M[n-2] = rhs[n-2].
    m[1] = rhs[1] / 6.0;
    m[n - 2] = rhs[n - 2] / 6.0;
    let inner = n.saturating_sub(4); // unknowns M2 ..= M[n-3]
    if inner > 0 {
        let mut diag = vec![4.0; inner];
        let mut d: Vec<f64> = (0..inner).map(|k| rhs[k + 2]).collect();
        d[0] -= m[1];
        d[inner - 1] -= m[n - 2];
        for k in 1..inner {
            let w = 1.0 / diag[k - 1];
            diag[k] -= w;
            d[k] -= w * d[k - 1];
        }
        m[inner + 1] = d[inner - 1] / diag[inner - 1];
        for k in (0..inner - 1).rev() {
            m[k + 2] = (d[k] - m[k + 3]) / diag[k];
        }
    }
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

/// Resamples `series` to `target_len` points with a not-a-knot cubic spline
/// over a uniform parameterisation. The first and last samples are kept
/// exactly and cubic polynomials are reproduced exactly.
pub fn resample(series: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!("spline resampling needs at least 4 samples, got {n}")));
    }
    if target_len < 2 {
        return Err(Error::InvalidInput(format!("target length must be at least 2, got {target_len}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample in series".into()));
    }
    let m = spline_moments(series);
    Ok((0..target_len)
        .map(|j| {
            let t = (j * (n - 1)) as f64 / (target_len - 1) as f64;
            let i = (t.floor() as usize).min(n - 2);
            let b = t - i as f64;
            let a = 1.0 - b;
            a * series[i]
                + b * series[i + 1]
                + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) / 6.0
        })
        .collect())
}

/// How the linear drift left by the unknown initial velocity is removed
/// from integrated displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftRemoval {
    /// Leave the double integral as is.
    None,
    /// Subtract the mean velocity before the second integration, then the
    /// mean displacement. Exact for periodic motion over whole periods.
    #[default]
    VelocityMean,
    /// Subtract the least-squares line from the displacement.
    LeastSquaresLine,
}

/// Steps of the accelerometer-to-displacement pipeline that can be turned
/// off for testing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementOptions {
    pub remove_mean: bool,
    pub drift: DriftRemoval,
    pub sample_rate_hz: f64,
    pub output_len: usize,
}

impl Default for DisplacementOptions {
    fn default() -> Self {
        DisplacementOptions {
            remove_mean: true,
            drift: DriftRemoval::VelocityMean,
            sample_rate_hz: 20.0,
            output_len: 600,
        }
    }
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Cumulative trapezoid integral starting at zero.
pub fn cumulative_trapezoid(series: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (i, v) in series.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (series[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Subtracts the least-squares line through `(i, series[i])`.
pub fn detrend(series: &mut [f64]) {
    let n = series.len() as f64;
    if series.len() < 2 {
        return;
    }
    let mean_t = (n - 1.0) / 2.0;
    let mean_y = series.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in series.iter().enumerate() {
        let dt = i as f64 - mean_t;
        sxy += dt * (y - mean_y);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    for (i, y) in series.iter_mut().enumerate() {
        *y -= mean_y + slope * (i as f64 - mean_t);
    }
}

/// Displacement of one accelerometer channel before resampling.
pub fn channel_displacement(accel: &[f64], opts: &DisplacementOptions) -> Vec<f64> {
    let dt = 1.0 / opts.sample_rate_hz;
    let mut a = accel.to_vec();
    if opts.remove_mean {
        subtract_mean(&mut a);
    }
    let mut v = cumulative_trapezoid(&a, dt);
    if opts.drift == DriftRemoval::VelocityMean {
        subtract_mean(&mut v);
    }
    let mut d = cumulative_trapezoid(&v, dt);
    match opts.drift {
        DriftRemoval::None => {}
        DriftRemoval::VelocityMean => subtract_mean(&mut d),
        DriftRemoval::LeastSquaresLine => detrend(&mut d),
    }
    d
}

/// Converts a `3 × M` accelerometer trace into displacement resampled to
/// `opts.output_len` samples per channel.
pub fn accel_displacement_with(channels: &[Vec<f64>], opts: &DisplacementOptions) -> Result<Vec<Vec<f64>>> {
    if channels.len() != 3 {
        return Err(Error::shape(3, channels.len(), "accelerometer channels"));
    }
    let m = channels[0].len();
    if let Some(c) = channels.iter().find(|c| c.len() != m) {
        return Err(Error::shape(m, c.len(), "accelerometer channel length"));
    }
    if m < 4 {
        return Err(Error::InvalidInput(format!("accelerometer trace needs at least 4 samples, got {m}")));
    }
    if channels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite accelerometer sample".into()));
    }
    if channels.iter().flatten().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput("accelerometer trace is identically zero".into()));
    }
    channels
        .iter()
        .map(|c| resample(&channel_displacement(c, opts), opts.output_len))
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn finite_difference_documented_cases() {
        assert_eq!(finite_difference(&[4.0; 6], 1, 0.5).unwrap(), vec![0.0; 6]);
        let ramp: Vec<f64> = (0..7).map(|i| 3.0 * i as f64 + 1.0).collect();
        for d in finite_difference(&ramp, 1, 1.0).unwrap() {
            assert!((d - 3.0).abs() < 1e-12);
        }
        let quad: Vec<f64> = (0..30).map(|i| 5.0 * (0.1 * i as f64).powi(2)).collect();
        for d in finite_difference(&quad, 2, 0.1).unwrap() {
            assert!((d - 10.0).abs() < 1e-9, "{d}");
        }
        assert!(finite_difference(&[1.0, 2.0], 1, 1.0).is_err());
        assert!(finite_difference(&[1.0, 2.0, 3.0], 3, 1.0).is_err());
    }

    #[test]
    fn resample_identity_and_constant() {
        let s: Vec<f64> = (0..17).map(|i| (i as f64 * 0.7).sin()).collect();
        let r = resample(&s, 17).unwrap();
        for (a, b) in s.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(resample(&[2.5; 9], 40).unwrap().iter().all(|&v| (v - 2.5).abs() < 1e-15));
        assert!(resample(&[1.0, 2.0, 3.0], 10).is_err());
    }

    #[test]
    fn resample_reproduces_cubic() {
        let p = |t: f64| t * t * t - 2.0 * t;
        let src: Vec<f64> = (0..20).map(|i| p(-2.0 + 4.0 * i as f64 / 19.0)).collect();
        let up = resample(&src, 600).unwrap();
        for (j, v) in up.iter().enumerate() {
            let t = -2.0 + 4.0 * j as f64 / 599.0;
            assert!((v - p(t)).abs() < 1e-6, "{j}: {v} vs {}", p(t));
        }
        assert_eq!(up[0], src[0]);
        assert_eq!(up[599], src[19]);
    }

    #[test]
    fn four_point_spline_is_the_interpolating_cubic() {
        let p = |t: f64| 0.5 * t * t * t - t * t + 2.0;
        let src: Vec<f64> = (0..4).map(|i| p(i as f64)).collect();
        let up = resample(&src, 31).unwrap();
        for (j, v) in up.iter().enumerate() {
            assert!((v - p(3.0 * j as f64 / 30.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_acceleration_integrates_to_parabola() {
        let a = 2.0;
        let opts = DisplacementOptions { remove_mean: false, drift: DriftRemoval::None, ..Default::default() };
        let d = channel_displacement(&[a; 60], &opts);
        for (i, v) in d.iter().enumerate().skip(5) {
            let t = i as f64 / 20.0;
            assert!((v - 0.5 * a * t * t).abs() <= 0.01 * 0.5 * a * t * t);
        }
    }

    #[test]
    fn sinusoid_amplitude_is_recovered() {
        let (amp, w) = (3.0, 2.0 * std::f64::consts::PI);
        let m = 60; // three periods at 20 Hz
        let ax: Vec<f64> = (0..m).map(|i| amp * (w * i as f64 / 20.0).sin()).collect();
        let d = channel_displacement(&ax, &DisplacementOptions::default());
        let peak = d.iter().fold(0.0_f64, |p, v| p.max(v.abs()));
        let expected = amp / (w * w);
        assert!((peak - expected).abs() < 0.02 * expected, "{peak} vs {expected}");
    }

    #[test]
    fn least_squares_detrend_removes_lines() {
        let mut s: Vec<f64> = (0..50).map(|i| 3.0 - 0.25 * i as f64).collect();
        detrend(&mut s);
        assert!(s.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn circular_motion_radius_is_recovered() {
        // two laps of radius 0.3 m in 3 s; centripetal magnitude r w^2
        let (r, w) = (0.3, 2.0 * std::f64::consts::PI / 1.5);
        let m = 60;
        let t = |i: usize| i as f64 / 20.0;
        let ax: Vec<f64> = (0..m).map(|i| -r * w * w * (w * t(i)).cos()).collect();
        let ay: Vec<f64> = (0..m).map(|i| 9.81 - r * w * w * (w * t(i)).sin()).collect();
        let d = accel_displacement_with(&[ax, ay, vec![0.0; m]], &DisplacementOptions::default()).unwrap();
        let radius = d[0].iter().zip(&d[1]).map(|(x, y)| (x * x + y * y).sqrt()).sum::<f64>() / 600.0;
        assert!((radius - r).abs() < 0.02 * r, "{radius}");
    }

    #[test]
    fn accel_errors_and_gravity_only() {
        let zeros = vec![vec![0.0; 10]; 3];
        assert!(accel_displacement_with(&zeros, &DisplacementOptions::default()).is_err());
        let mut nan = vec![vec![1.0; 10]; 3];
        nan[1][3] = f64::NAN;
        assert!(accel_displacement_with(&nan, &DisplacementOptions::default()).is_err());
        let gravity = vec![vec![0.0; 60], vec![9.81; 60], vec![0.0; 60]];
        let d = accel_displacement_with(&gravity, &DisplacementOptions::default()).unwrap();
        assert!(d.iter().all(|c| c.len() == 600 && c.iter().all(|v| v.abs() < 1e-12)));
    }

    proptest! {
        #[test]
        fn second_order_is_first_order_twice(v in prop::collection::vec(-100.0f64..100.0, 3..40), dt in 0.01f64..2.0) {
            let twice = finite_difference(&finite_difference(&v, 1, dt).unwrap(), 1, dt).unwrap();
            prop_assert_eq!(finite_difference(&v, 2, dt).unwrap(), twice);
        }

        #[test]
        fn resample_is_linear(
            u in prop::collection::vec(-10.0f64..10.0, 4..30),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            target in 2usize..100,
        ) {
            let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| x * 0.5 + i as f64).collect();
            let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let (ru, rv, rm) = (resample(&u, target).unwrap(), resample(&v, target).unwrap(), resample(&mix, target).unwrap());
            for i in 0..target {
                prop_assert!((rm[i] - (a * ru[i] + b * rv[i])).abs() < 1e-9);
            }
        }
    }
}
