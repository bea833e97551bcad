//! Independent brute-force routes used as ground truth.
//!
//! Nothing here touches the closed-form paths it is meant to check: sums are
//! direct compensated summations over the pmf window, and the orthonormal
//! polynomials come from Gram–Schmidt on the monomials rather than from the
//! Rodrigues formula.

use crate::family::OrdModel;
use crate::quad::forward_difference;
use crate::sum::{kahan_sum, KahanSum};
use crate::{Error, Result};

/// Guard against runaway sums.
const OVERFLOW_GUARD: f64 = 1e280;

/// A direct sum with its bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub value: f64,
    pub terms_summed: usize,
    /// Crude upper estimate of what the clipped tails could contribute.
    pub tail_estimate: f64,
}

/// Direct `Σ f(j) p(j)` over the window.
pub fn brute_expectation<F: Fn(i64) -> f64>(model: &OrdModel, f: F) -> Result<OracleResult> {
    let pmf = model.pmf();
    let mut acc = KahanSum::new();
    let mut terms = 0usize;
    for (j, p) in pmf.iter() {
        let term = f(j) * p;
        if !term.is_finite() || term.abs() > OVERFLOW_GUARD {
            return Err(Error::OverflowGuard);
        }
        acc.add(term);
        terms += 1;
    }
    let edge = |j: i64| f(j).abs().max(1.0);
    let tail_estimate =
        pmf.tail_mass_lo * edge(pmf.window.lo) + pmf.tail_mass_hi * edge(pmf.window.hi);
    Ok(OracleResult { value: acc.value(), terms_summed: terms, tail_estimate })
}

/// Direct `Var g(X) = E g² - (E g)²`.
pub fn brute_variance<F: Fn(i64) -> f64>(model: &OrdModel, g: F) -> Result<OracleResult> {
    let eg = brute_expectation(model, &g)?;
    let eg2 = brute_expectation(model, |j| {
        let v = g(j);
        v * v
    })?;
    Ok(OracleResult {
        value: eg2.value - eg.value * eg.value,
        terms_summed: eg.terms_summed + eg2.terms_summed,
        tail_estimate: eg2.tail_estimate + 2.0 * eg.value.abs() * eg.tail_estimate,
    })
}

/// Orthonormal polynomials (as value tables on the window, positive leading
/// coefficients) built by modified Gram–Schmidt on `{1, x, ..., x^n}` under
/// the pmf inner product, with one reorthogonalization pass.
pub fn gram_schmidt_basis(model: &OrdModel, n: usize) -> Result<Vec<Vec<f64>>> {
    model.require_degree(n)?;
    model.budget().require(2.0 * n as f64)?;
    let pmf = model.pmf();
    let window = pmf.window;
    let weights: Vec<f64> = pmf.probs().to_vec();
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        kahan_sum(a.iter().zip(b).zip(&weights).map(|((x, y), w)| x * y * w))
    };

    // centered monomials span the same prefixes as {1, x, ..., x^n} and
    // keep the Gram matrix tame
    let center = model.mu().round();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for d in 0..=n {
        let mut v: Vec<f64> =
            window.iter().map(|j| (j as f64 - center).powi(d as i32)).collect();
        let orig_norm2 = dot(&v, &v);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let norm2 = dot(&v, &v);
        if !(norm2 > 1e-24 * orig_norm2.max(f64::MIN_POSITIVE)) {
            return Err(Error::RankDeficient { degree: d, ratio: norm2 / orig_norm2 });
        }
        let inv = 1.0 / norm2.sqrt();
        for vi in v.iter_mut() {
            *vi *= inv;
        }
        if leading_sign(&v, window.lo, d) < 0.0 {
            for vi in v.iter_mut() {
                *vi = -*vi;
            }
        }
        basis.push(v);
    }
    Ok(basis)
}

/// Sign of the degree-`d` coefficient of a polynomial given by values on
/// consecutive integer nodes starting at `lo`: the d-th forward difference
/// near the window center has the sign of `d! · lead`.
fn leading_sign(values: &[f64], _lo: i64, d: usize) -> f64 {
    let start = (values.len().saturating_sub(d + 1)) / 2;
    let segment = &values[start..start + d + 1];
    let diff = forward_difference(segment, d).expect("segment has d+1 values");
    diff[0].signum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Quadratic;

    fn poisson2() -> OrdModel {
        OrdModel::new(2.0, Quadratic::constant(2.0)).unwrap()
    }

    #[test]
    fn normalization_and_mean() {
        let model = poisson2();
        let one = brute_expectation(&model, |_| 1.0).unwrap();
        assert!((one.value - 1.0).abs() <= 2.0 * model.pmf().tail_tol + 1e-13);
        let mean = brute_expectation(&model, |j| j as f64).unwrap();
        assert!((mean.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn binomial_central_second_moment() {
        let model = OrdModel::new(2.0, Quadratic::new(0.0, -0.5, 2.0)).unwrap();
        let v = brute_expectation(&model, |j| (j as f64 - 2.0).powi(2)).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_of_constant_is_zero() {
        let model = poisson2();
        let v = brute_variance(&model, |_| 3.25).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn variance_of_square_on_poisson() {
        let model = poisson2();
        let v = brute_variance(&model, |j| (j * j) as f64).unwrap();
        assert!((v.value - 58.0).abs() < 1e-9);
    }

    #[test]
    fn gram_schmidt_first_polynomials() {
        let model = poisson2();
        let basis = gram_schmidt_basis(&model, 1).unwrap();
        let window = model.window();
        for (idx, j) in window.iter().enumerate() {
            assert!((basis[0][idx] - 1.0).abs() < 1e-12);
            let expect = (j as f64 - 2.0) / 2.0f64.sqrt();
            assert!((basis[1][idx] - expect).abs() < 1e-9, "j={j}");
        }
    }

    #[test]
    fn gram_schmidt_is_orthonormal() {
        let model = OrdModel::new(2.0, Quadratic::new(0.0, -0.5, 2.0)).unwrap();
        let basis = gram_schmidt_basis(&model, 4).unwrap();
        let probs = model.pmf().probs();
        for a in 0..basis.len() {
            for b in 0..=a {
                let dot = kahan_sum(
                    basis[a].iter().zip(&basis[b]).zip(probs).map(|((x, y), p)| x * y * p),
                );
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "({a},{b}) -> {dot}");
            }
        }
    }

    #[test]
    fn gram_schmidt_rank_deficiency() {
        // degree beyond M on a finite support is rejected up front
        let model = OrdModel::new(2.0, Quadratic::new(0.0, -0.5, 2.0)).unwrap();
        assert!(matches!(
            gram_schmidt_basis(&model, 5),
            Err(Error::DegreeExceedsSupport { k: 5, max: 4 })
        ));
    }
}
