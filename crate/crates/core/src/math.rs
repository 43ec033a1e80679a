//! Small numeric helpers shared by the losses and the model.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Log-sum-exp with max subtraction. Returns `-inf` for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// Log-sum-exp over the entries whose mask bit is set.
pub fn masked_logsumexp(values: &[f64], mask: &[bool]) -> f64 {
    let max = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| libm::exp(v - max))
        .sum();
    max + libm::log(sum)
}

/// Softmax of one logit row, computed after subtracting the row maximum.
pub fn softmax_row(logits: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(logits.len());
    softmax_into(logits, &mut out)?;
    Ok(out)
}

pub(crate) fn softmax_into(logits: &[f64], out: &mut Vec<f64>) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(logits.iter().map(|&v| libm::exp(v - max)));
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Nearest-rank quantile: the entry at `min(floor(ratio * n), n - 1)` of the
/// ascending sort. `values` is sorted in place.
pub fn nearest_rank_quantile(values: &mut [f64], ratio: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config("quantile ratio must lie in [0, 1]"));
    }
    values.sort_unstable_by(f64::total_cmp);
    Ok(values[quantile_index(values.len(), ratio)])
}

pub(crate) fn quantile_index(n: usize, ratio: f64) -> usize {
    let idx = libm::floor(ratio * n as f64) as usize;
    idx.min(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetric() {
        let p = softmax_row(&[0.0, 0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_ln2() {
        let p = softmax_row(&[core::f64::consts::LN_2, 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_logit_no_overflow() {
        let p = softmax_row(&[1000.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert_eq!(softmax_row(&[f64::NAN, 0.0]), Err(Error::NonFiniteLogits));
        assert_eq!(softmax_row(&[f64::INFINITY]), Err(Error::NonFiniteLogits));
    }

    #[test]
    fn quantile_nearest_rank() {
        let mut v = [0.9, 0.5, 0.7, 0.6];
        assert_eq!(nearest_rank_quantile(&mut v, 0.5).unwrap(), 0.7);
        assert_eq!(nearest_rank_quantile(&mut v, 0.0).unwrap(), 0.5);
        assert_eq!(nearest_rank_quantile(&mut v, 1.0).unwrap(), 0.9);
        assert!(nearest_rank_quantile(&mut [], 0.5).is_err());
    }

    #[test]
    fn logsumexp_matches_naive() {
        let v = [0.3, -1.2, 2.5];
        let naive = libm::log(v.iter().map(|&x| libm::exp(x)).sum::<f64>());
        assert!((logsumexp(&v) - naive).abs() < 1e-14);
        let mask = [true, false, true];
        let naive = libm::log(libm::exp(0.3) + libm::exp(2.5));
        assert!((masked_logsumexp(&v, &mask) - naive).abs() < 1e-14);
    }
}
