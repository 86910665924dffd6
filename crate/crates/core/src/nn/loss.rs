use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped into `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    Bce,
}

fn check(output: &[f64], target: &[f64]) -> Result<()> {
    if output.len() != target.len() {
        return Err(Error::shape(output.len(), target.len(), "loss target"));
    }
    if output.is_empty() {
        return Err(Error::InvalidInput("loss over an empty vector".into()));
    }
    Ok(())
}

fn check_targets(kind: LossKind, target: &[f64]) -> Result<()> {
    if kind == LossKind::Bce {
        if let Some(t) = target.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidInput(format!("bce target {t} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Mean of the element-wise loss.
pub fn loss(kind: LossKind, output: &[f64], target: &[f64]) -> Result<f64> {
    check(output, target)?;
    check_targets(kind, target)?;
    let n = output.len() as f64;
    let total: f64 = match kind {
        LossKind::Mse => output.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum(),
        LossKind::Bce => output
            .iter()
            .zip(target)
            .map(|(&o, &t)| {
                let p = o.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum(),
    };
    Ok(total / n)
}

/// Gradient of [`loss`] with respect to `output`. For BCE the gradient is zero
/// wherever the clamp is active, matching the clamped forward value.
pub fn loss_gradient(kind: LossKind, output: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check(output, target)?;
    check_targets(kind, target)?;
    let n = output.len() as f64;
    Ok(match kind {
        LossKind::Mse => output.iter().zip(target).map(|(o, t)| 2.0 * (o - t) / n).collect(),
        LossKind::Bce => output
            .iter()
            .zip(target)
            .map(|(&o, &t)| {
                if o <= BCE_EPS || o >= 1.0 - BCE_EPS {
                    0.0
                } else {
                    (o - t) / (o * (1.0 - o)) / n
                }
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_values() {
        assert_eq!(loss(LossKind::Mse, &[1.0, 3.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(loss_gradient(LossKind::Mse, &[1.0, 3.0], &[1.0, 1.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn bce_is_finite_at_extremes() {
        let l = loss(LossKind::Bce, &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(l.is_finite());
        assert!((l - -(BCE_EPS.ln())).abs() < 1e-9);
        let g = loss_gradient(LossKind::Bce, &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn bce_gradient_matches_difference() {
        let o = [0.3, 0.8];
        let t = [1.0, 0.0];
        let g = loss_gradient(LossKind::Bce, &o, &t).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut p = o;
            p[i] += h;
            let mut m = o;
            m[i] -= h;
            let num = (loss(LossKind::Bce, &p, &t).unwrap() - loss(LossKind::Bce, &m, &t).unwrap()) / (2.0 * h);
            assert!((num - g[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn documented_values() {
        assert_eq!(loss(LossKind::Mse, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(loss(LossKind::Mse, &[0.0], &[2.0]).unwrap(), 4.0);
        let l = loss(LossKind::Bce, &[0.5], &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_of_p_against_itself_is_binary_entropy() {
        for p in [0.1, 0.5, 0.9] {
            let h = -(p * f64::ln(p) + (1.0 - p) * f64::ln(1.0 - p));
            assert!((loss(LossKind::Bce, &[p], &[p]).unwrap() - h).abs() < 1e-14);
        }
    }

    #[test]
    fn bce_rejects_targets_outside_unit_interval() {
        assert!(loss(LossKind::Bce, &[0.5], &[1.5]).is_err());
        assert!(loss_gradient(LossKind::Bce, &[0.5], &[-0.1]).is_err());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(loss(LossKind::Mse, &[1.0], &[1.0, 2.0]).is_err());
    }
}
