use alloc::format;

use crate::error::{dim, Error, Result};

/// Floor applied to probabilities before taking the logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossKind {
    /// Mean of squared componentwise differences.
    Mse,
    /// Categorical cross-entropy against a one-hot target.
    Cce,
}

/// Loss of a single prediction. For `Cce` the whole vector is one
/// categorical distribution.
pub fn loss(kind: LossKind, prediction: &[f64], target: &[f64]) -> Result<f64> {
    grouped_loss(kind, prediction, target, 1)
}

/// Loss where the prediction is split into `groups` equal-width segments.
/// For `Cce` each segment carries its own one-hot target and the result is
/// the mean over segments; `Mse` ignores the grouping.
pub fn grouped_loss(
    kind: LossKind,
    prediction: &[f64],
    target: &[f64],
    groups: usize,
) -> Result<f64> {
    dim("loss target", prediction.len(), target.len())?;
    if prediction.is_empty() {
        return Err(Error::Dimension {
            context: "loss prediction",
            expected: 1,
            actual: 0,
        });
    }
    match kind {
        LossKind::Mse => {
            let sum: f64 = prediction
                .iter()
                .zip(target)
                .map(|(p, t)| (p - t) * (p - t))
                .sum();
            Ok(sum / prediction.len() as f64)
        }
        LossKind::Cce => {
            let hot = hot_indices(target, groups)?;
            let width = target.len() / groups;
            let mut total = 0.0;
            for (g, idx) in hot.enumerate() {
                let p = prediction[g * width + idx];
                total -= libm::log(p.max(LOG_CLAMP));
            }
            Ok(total / groups as f64)
        }
    }
}

/// Validates a grouped one-hot target and yields the hot index of each group.
pub(crate) fn hot_indices(
    target: &[f64],
    groups: usize,
) -> Result<impl Iterator<Item = usize> + '_> {
    if groups == 0 || !target.len().is_multiple_of(groups) {
        return Err(Error::InvalidTarget(format!(
            "length {} does not split into {} groups",
            target.len(),
            groups
        )));
    }
    let width = target.len() / groups;
    let mut ok = true;
    for chunk in target.chunks(width) {
        let ones = chunk.iter().filter(|&&v| v == 1.0).count();
        let zeros = chunk.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != width {
            ok = false;
            break;
        }
    }
    if !ok {
        return Err(Error::InvalidTarget(format!(
            "categorical target is not one-hot per group of {width}"
        )));
    }
    Ok(target
        .chunks(width)
        .map(|chunk| chunk.iter().position(|&v| v == 1.0).unwrap_or(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mse_examples() {
        assert_eq!(loss(LossKind::Mse, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        let x = [0.3, -7.0, 1e3];
        assert_eq!(loss(LossKind::Mse, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn cce_uniform_is_log_classes() {
        let p = vec![1.0 / 8.0; 8];
        for hot in 0..8 {
            let mut t = vec![0.0; 8];
            t[hot] = 1.0;
            let l = loss(LossKind::Cce, &p, &t).unwrap();
            assert!((l - libm::log(8.0)).abs() < 1e-12);
            assert!((l - 2.0794).abs() < 1e-4);
        }
    }

    #[test]
    fn cce_clamps_zero_probability() {
        let l = loss(LossKind::Cce, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((l + libm::log(LOG_CLAMP)).abs() < 1e-9);
        // exact match hits the floor of zero loss
        assert_eq!(loss(LossKind::Cce, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cce_rejects_non_one_hot() {
        assert!(matches!(
            loss(LossKind::Cce, &[0.5, 0.5], &[0.5, 0.5]),
            Err(Error::InvalidTarget(_))
        ));
        assert!(matches!(
            loss(LossKind::Cce, &[0.5, 0.5], &[1.0, 1.0]),
            Err(Error::InvalidTarget(_))
        ));
    }

    #[test]
    fn grouped_cce_averages_groups() {
        let p = [0.5, 0.5, 0.25, 0.75];
        let t = [1.0, 0.0, 0.0, 1.0];
        let l = grouped_loss(LossKind::Cce, &p, &t, 2).unwrap();
        let expect = -(libm::log(0.5) + libm::log(0.75)) / 2.0;
        assert!((l - expect).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            loss(LossKind::Mse, &[1.0], &[1.0, 2.0]),
            Err(Error::Dimension {
                expected: 1,
                actual: 2,
                ..
            })
        ));
    }
}
