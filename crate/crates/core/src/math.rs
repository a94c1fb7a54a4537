//! Small numeric helpers shared across modules.

use alloc::vec::Vec;

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity, clamped to `[-1, 1]`.
///
/// Computed as `a·b / sqrt(|a|²|b|²)` so that `cosine(v, v)` is exactly 1.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let na = dot(a, a);
    let nb = dot(b, b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let c = dot(a, b) / libm::sqrt(na * nb);
    Ok(c.clamp(-1.0, 1.0))
}

/// Element-wise arithmetic mean. Returns `None` for an empty input.
pub fn mean_vector<'a, I>(vectors: I, dimension: usize) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = alloc::vec![0.0; dimension];
    let mut n = 0usize;
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let n = n as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Some(acc)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-libm::fabs(z)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_closed_forms() {
        let c = cosine(&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!((c - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(), -1.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm));
    }

    #[test]
    fn self_cosine_is_exactly_one() {
        let v = [0.1, -0.7, 3.3, 1e-3, 12.5];
        assert_eq!(cosine(&v, &v).unwrap(), 1.0);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for z in [-5.0, -0.3, 0.0, 0.8, 4.0] {
            let naive = (1.0 + f64::exp(z)).ln();
            assert!((softplus(z) - naive).abs() < 1e-12);
        }
        assert!(softplus(800.0).is_finite());
    }
}
