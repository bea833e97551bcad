//! Rodrigues-type orthogonal polynomials.
//!
//! ```text
//! P_k(j) = (1/p(j)) Σ_{i=0}^{k} (-1)^{k-i} C(k,i) q^{[k]}(j-i) p(j-i),
//! ```
//!
//! a polynomial of degree ≤ k with leading coefficient
//! `c_k(δ) = ∏_{j=k-1}^{2k-2} (1-jδ)`, orthogonal with
//! `E P_k P_m = δ_{k,m} c_k(δ) A_k`. The standardized `φ_k = P_k /
//! (k! c_k(δ) A_k)^{1/2}` form the orthonormal system; their forward
//! differences transfer to the orthonormal system of the derived
//! distribution X_m with the constants `v^{(m)}_{k-m}`.

use crate::family::OrdModel;
use crate::moments::norm_constant_a;
use crate::quad::{binomial_coefficient, factorial, forward_difference};
use crate::sum::KahanSum;
use crate::{Error, Result};

/// Below this probability, Rodrigues values are replaced by polynomial
/// evaluations: dividing by sub-underflow p(j) destroys precision.
const UNDERFLOW_FLOOR: f64 = 1e-280;

/// Leading coefficient `c_k(δ) = ∏_{j=k-1}^{2k-2} (1-jδ)` of `P_k`.
pub fn lead_coefficient(delta: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prod = 1.0;
    for j in k - 1..=2 * k - 2 {
        prod *= 1.0 - j as f64 * delta;
    }
    prod
}

/// `λ_k(δ) = k[1-(k-1)δ]`, the eigenvalue-like constant of the extended
/// cumulative equation.
pub fn lambda_k(delta: f64, k: usize) -> f64 {
    k as f64 * (1.0 - (k as f64 - 1.0) * delta)
}

/// A polynomial in Newton forward-difference form at consecutive integer
/// nodes `x0, x0+1, ...`: `P(x) = Σ_t d_t (x-x0)(x-x0-1)···(x-x0-t+1)`.
#[derive(Debug, Clone)]
struct NewtonForm {
    x0: f64,
    diffs: Vec<f64>,
}

impl NewtonForm {
    fn fit(first_node: i64, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::WindowTooSmall { needed: 1, have: 0 });
        }
        let k = values.len() - 1;
        let mut diffs = Vec::with_capacity(k + 1);
        for t in 0..=k {
            let d = forward_difference(values, t)?[0] / factorial(t);
            diffs.push(d);
        }
        Ok(NewtonForm { x0: first_node as f64, diffs })
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.diffs.len() - 1;
        let mut acc = self.diffs[k];
        for t in (0..k).rev() {
            acc = self.diffs[t] + (x - self.x0 - t as f64) * acc;
        }
        acc
    }

    fn monomial_coefficients(&self) -> Vec<f64> {
        let k = self.diffs.len() - 1;
        let mut coeffs = vec![0.0; k + 1];
        // running product ∏_{t} (x - (x0 + t)), degree grows with t
        let mut factor = vec![0.0; k + 2];
        factor[0] = 1.0;
        let mut deg = 0usize;
        for (t, &d) in self.diffs.iter().enumerate() {
            for (c, f) in coeffs.iter_mut().zip(&factor) {
                *c += d * f;
            }
            if t < k {
                let node = self.x0 + t as f64;
                // factor *= (x - node)
                for i in (1..=deg + 1).rev() {
                    factor[i] = factor[i - 1] - node * factor[i];
                }
                factor[0] *= -node;
                deg += 1;
            }
        }
        coeffs
    }
}

/// Monomial coefficients of the unique degree ≤ k interpolant through
/// `values` at the consecutive integer nodes starting at `first_node`.
pub fn fit_coefficients(first_node: i64, values: &[f64]) -> Result<Vec<f64>> {
    Ok(NewtonForm::fit(first_node, values)?.monomial_coefficients())
}

/// An orthogonal polynomial with its standardized companion.
#[derive(Debug, Clone)]
pub struct OrthoPolynomial {
    pub degree: usize,
    /// `P_k(j)` on the pmf window; Rodrigues sums where they are reliable,
    /// polynomial evaluations elsewhere (see `raw_mask`).
    pub values: Vec<f64>,
    /// True where `values` came from the Rodrigues sums.
    pub raw_mask: Vec<bool>,
    /// Monomial coefficients `c(k, 0..k)`.
    pub coeffs: Vec<f64>,
    /// `c_k(δ)`, the theoretical leading coefficient.
    pub lead: f64,
    /// `E P_k² = k! c_k(δ) A_k`.
    pub norm_sq: f64,
    /// `φ_k(j) = P_k(j)/norm_sq^{1/2}` on the window.
    pub standardized_values: Vec<f64>,
    pub standardized_coeffs: Vec<f64>,
    /// `d_k = lead(φ_k) > 0`.
    pub d_k: f64,
    newton: NewtonForm,
}

impl OrthoPolynomial {
    /// Evaluates `P_k` anywhere via its Newton form.
    pub fn eval(&self, x: f64) -> f64 {
        self.newton.eval(x)
    }

    /// Evaluates `φ_k` anywhere.
    pub fn eval_standardized(&self, x: f64) -> f64 {
        self.newton.eval(x) / self.norm_sq.sqrt()
    }
}

/// Raw Rodrigues sums for `P_k` on the window, with a mask of the entries
/// where the sum is reliable: every `p(j-i)` needed must lie inside the
/// window or truly outside the support, and `p(j)` must be above the
/// underflow floor.
fn rodrigues_raw(model: &OrdModel, k: usize) -> (Vec<f64>, Vec<bool>) {
    let pmf = model.pmf();
    let window = pmf.window;
    let q = model.quadratic();
    let signs: Vec<f64> = (0..=k)
        .map(|i| if (k - i) % 2 == 0 { 1.0 } else { -1.0 } * binomial_coefficient(k, i))
        .collect();
    // q^{[k]}(j) p(j) over the window; zero outside
    let weighted = |j: i64| -> f64 {
        match window.index_of(j) {
            Some(idx) => q.ascending_power(k, j as f64) * pmf.probs()[idx],
            None => 0.0,
        }
    };

    let mut values = Vec::with_capacity(window.len());
    let mut mask = Vec::with_capacity(window.len());
    for j in window.iter() {
        let p_j = pmf.prob(j);
        let reliable =
            p_j >= UNDERFLOW_FLOOR && (!window.lo_truncated || j - k as i64 >= window.lo);
        if !reliable {
            values.push(f64::NAN);
            mask.push(false);
            continue;
        }
        let mut acc = KahanSum::new();
        for (i, sign) in signs.iter().enumerate() {
            acc.add(sign * weighted(j - i as i64));
        }
        values.push(acc.value() / p_j);
        mask.push(true);
    }
    (values, mask)
}

/// Nodes used to pin the interpolating polynomial: the k+1 lowest support
/// nodes when α is exact, the highest when only ω is exact, else a central
/// block (two-sided truncation).
fn anchor_start(model: &OrdModel, k: usize) -> Result<i64> {
    let window = model.window();
    if window.len() < k + 1 {
        return Err(Error::WindowTooSmall { needed: k + 1, have: window.len() });
    }
    let start = if !window.lo_truncated {
        window.lo
    } else if !window.hi_truncated {
        window.hi - k as i64
    } else {
        model.mu().round() as i64
    };
    let lo_valid = if window.lo_truncated { window.lo + k as i64 } else { window.lo };
    let start = start.max(lo_valid).min(window.hi - k as i64);
    if start < lo_valid {
        return Err(Error::WindowTooSmall { needed: 2 * k + 1, have: window.len() });
    }
    Ok(start)
}

/// `P_k` values on the window: Rodrigues sums where reliable, polynomial
/// evaluations (flagged false in the mask) elsewhere.
pub fn rodrigues_values(model: &OrdModel, k: usize) -> Result<(Vec<f64>, Vec<bool>)> {
    model.require_degree(k)?;
    model.budget().require(2.0 * k as f64)?;
    let (mut values, mask) = rodrigues_raw(model, k);
    if mask.iter().all(|&m| m) {
        return Ok((values, mask));
    }
    let newton = fit_newton(model, k, &values)?;
    let window = model.window();
    for (idx, j) in window.iter().enumerate() {
        if !mask[idx] {
            values[idx] = newton.eval(j as f64);
        }
    }
    Ok((values, mask))
}

fn fit_newton(model: &OrdModel, k: usize, raw: &[f64]) -> Result<NewtonForm> {
    let start = anchor_start(model, k)?;
    let lo = model.window().lo;
    let seg = &raw[(start - lo) as usize..(start - lo) as usize + k + 1];
    NewtonForm::fit(start, seg)
}

/// Builds `φ_0, ..., φ_n` with positive leading coefficients.
pub fn orthonormal_basis(model: &OrdModel, n: usize) -> Result<Vec<OrthoPolynomial>> {
    model.require_degree(n)?;
    model.budget().require(2.0 * n as f64)?;
    let delta = model.quadratic().delta;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (mut values, mask) = rodrigues_raw(model, k);
        let newton = fit_newton(model, k, &values)?;
        for (idx, j) in model.window().iter().enumerate() {
            if !mask[idx] {
                values[idx] = newton.eval(j as f64);
            }
        }
        let coeffs = newton.monomial_coefficients();
        let lead = lead_coefficient(delta, k);
        let norm_sq = factorial(k) * lead * norm_constant_a(model, k)?;
        let scale = 1.0 / norm_sq.sqrt();
        let standardized_values: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let standardized_coeffs: Vec<f64> = coeffs.iter().map(|c| c * scale).collect();
        out.push(OrthoPolynomial {
            degree: k,
            values,
            raw_mask: mask,
            coeffs,
            lead,
            norm_sq,
            standardized_values,
            standardized_coeffs,
            d_k: lead * scale,
            newton,
        });
    }
    Ok(out)
}

/// The transfer constants of the difference identities.
#[derive(Debug, Clone)]
pub struct TransferConstants {
    /// `v[m][k-m] = v^{(m)}_{k-m}` for `0 ≤ m ≤ k ≤ n`.
    pub v: Vec<Vec<f64>>,
    /// `λ_k(δ) = k[1-(k-1)δ]` for `k = 0..=n`.
    pub lambda: Vec<f64>,
}

/// `v^{(m)}_{k-m} = (k! ∏_{j=k-1}^{k+m-2}(1-jδ) / ((k-m)! A_m))^{1/2}` and
/// the `λ_k` list.
pub fn transfer_constants(model: &OrdModel, n: usize) -> Result<TransferConstants> {
    model.require_degree(n)?;
    let delta = model.quadratic().delta;
    let mut v = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let a_m = norm_constant_a(model, m)?;
        let mut row = Vec::with_capacity(n - m + 1);
        for k in m..=n {
            let mut prod = 1.0;
            for j in k - 1..=k + m - 2 {
                // empty when m ≤ 1 and the range inverts
                prod *= 1.0 - j as f64 * delta;
            }
            if m == 0 {
                prod = 1.0;
            }
            let num = factorial(k) * prod;
            let den = factorial(k - m) * a_m;
            row.push((num / den).sqrt());
        }
        v.push(row);
    }
    let lambda = (0..=n).map(|k| lambda_k(delta, k)).collect();
    Ok(TransferConstants { v, lambda })
}

/// One (m, k) cell of the difference-transfer verification.
#[derive(Debug, Clone, Copy)]
pub struct TransferEntry {
    pub m: usize,
    pub k: usize,
    pub max_abs_discrepancy: f64,
    pub threshold: f64,
}

/// Pointwise verification of `Δ^m φ_k = v^{(m)}_{k-m} φ_{k-m,m}` against an
/// independently built basis on each derived distribution `X_m`.
#[derive(Debug, Clone)]
pub struct TransferReport {
    pub entries: Vec<TransferEntry>,
    pub passed: bool,
}

pub fn verify_difference_transfer(model: &OrdModel, n: usize) -> Result<TransferReport> {
    model.require_degree(n)?;
    model.budget().require(2.0 * n as f64)?;
    let basis = orthonormal_basis(model, n)?;
    let constants = transfer_constants(model, n)?;
    let window = model.window();

    let mut entries = Vec::new();
    let mut passed = true;
    for m in 1..=n {
        let derived = model.derive(m)?;
        let derived_basis = orthonormal_basis(&derived, n - m)?;
        for k in m..=n {
            let phi = &basis[k].standardized_values;
            let diff = forward_difference(phi, m)?;
            let v = constants.v[m][k - m];
            let norm_inf = phi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let threshold = 1e-8 * norm_inf.max(1.0);
            let mut worst = 0.0f64;
            for (idx, j) in (window.lo..=window.hi - m as i64).enumerate() {
                if let Some(di) = derived.window().index_of(j) {
                    let expect = v * derived_basis[k - m].standardized_values[di];
                    worst = worst.max((diff[idx] - expect).abs());
                }
            }
            passed &= worst < threshold;
            entries.push(TransferEntry { m, k, max_abs_discrepancy: worst, threshold });
        }
    }
    Ok(TransferReport { entries, passed })
}

/// Result of checking one of the summation identities; the discrepancy is
/// scaled by `max(1, max_j |lhs_j|)`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    pub k: usize,
    pub max_discrepancy: f64,
}

/// Extended cumulative equation:
/// `q(j)p(j) ΔP_k(j) = λ_k(δ) Σ_{i>j} P_k(i)p(i)`.
pub fn verify_extended_identity(model: &OrdModel, k: usize) -> Result<IdentityReport> {
    if k < 1 {
        return Err(Error::InvalidInput("extended identity needs k >= 1".into()));
    }
    model.require_degree(k)?;
    model.budget().require(2.0 * k as f64 - 1.0)?;
    let (values, _) = rodrigues_values(model, k)?;
    let pmf = model.pmf();
    let window = pmf.window;
    let q = model.quadratic();
    let lam = lambda_k(q.delta, k);

    // upper partial sums T(j) = Σ_{i>j} P_k(i) p(i), accumulated from the top
    let len = window.len();
    let mut upper = vec![0.0f64; len];
    let mut acc = KahanSum::new();
    for idx in (1..len).rev() {
        acc.add(values[idx] * pmf.probs()[idx]);
        upper[idx - 1] = acc.value();
    }

    let mut max_abs = 0.0f64;
    let mut scale = 1.0f64;
    for (idx, j) in window.iter().enumerate().take(len.saturating_sub(1)) {
        let lhs = q.eval(j as f64) * pmf.probs()[idx] * (values[idx + 1] - values[idx]);
        let rhs = lam * upper[idx];
        scale = scale.max(lhs.abs());
        max_abs = max_abs.max((lhs - rhs).abs());
    }
    Ok(IdentityReport { k, max_discrepancy: max_abs / scale })
}

/// Rodrigues inversion formula:
/// `q^{[k]}(j)p(j) = (1/(k-1)!) Σ_{i>j} (i-j-1)_{k-1} P_k(i)p(i)`.
pub fn verify_inversion_formula(model: &OrdModel, k: usize) -> Result<IdentityReport> {
    if k < 1 {
        return Err(Error::InvalidInput("inversion formula needs k >= 1".into()));
    }
    model.require_degree(k)?;
    model.budget().require(2.0 * k as f64 - 1.0)?;
    let (values, _) = rodrigues_values(model, k)?;
    let pmf = model.pmf();
    let window = pmf.window;
    let q = model.quadratic();
    let inv_fact = 1.0 / factorial(k - 1);

    let mut max_abs = 0.0f64;
    let mut scale = 1.0f64;
    for (idx, j) in window.iter().enumerate() {
        let lhs = q.ascending_power(k, j as f64) * pmf.probs()[idx];
        let mut acc = KahanSum::new();
        for (idx_i, i) in window.iter().enumerate().skip(idx + 1) {
            let w = crate::quad::descending_factorial((i - j - 1) as f64, k - 1);
            acc.add(w * values[idx_i] * pmf.probs()[idx_i]);
        }
        let rhs = inv_fact * acc.value();
        scale = scale.max(lhs.abs());
        max_abs = max_abs.max((lhs - rhs).abs());
    }
    Ok(IdentityReport { k, max_discrepancy: max_abs / scale })
}

/// `Σ_j P_k(j)² p(j)` straight from the Rodrigues sums, without any
/// polynomial fitting; used to confirm that `P_k` vanishes identically when
/// k exceeds M on a finite support.
pub fn rodrigues_norm_raw(model: &OrdModel, k: usize) -> f64 {
    let (values, _) = rodrigues_raw(model, k);
    crate::sum::kahan_sum(
        values
            .iter()
            .zip(model.pmf().probs())
            .filter(|(v, _)| v.is_finite())
            .map(|(v, p)| v * v * p),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Quadratic;

    fn poisson2() -> OrdModel {
        OrdModel::new(2.0, Quadratic::constant(2.0)).unwrap()
    }

    fn binomial4() -> OrdModel {
        OrdModel::new(2.0, Quadratic::new(0.0, -0.5, 2.0)).unwrap()
    }

    #[test]
    fn degree_zero_is_constant_one() {
        let (values, mask) = rodrigues_values(&poisson2(), 0).unwrap();
        assert!(values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn degree_one_is_j_minus_mu() {
        for model in [poisson2(), binomial4()] {
            let (values, _) = rodrigues_values(&model, 1).unwrap();
            for (idx, j) in model.window().iter().enumerate() {
                let expect = j as f64 - model.mu();
                assert!((values[idx] - expect).abs() < 1e-10, "j={j}");
            }
        }
    }

    #[test]
    fn poisson_p2_at_zero_and_norm() {
        let model = poisson2();
        let (values, _) = rodrigues_values(&model, 2).unwrap();
        // all low terms vanish at j = 0: P_2(0) = λ² = 4
        assert!((values[0] - 4.0).abs() < 1e-10);
        let norm = crate::sum::kahan_sum(
            values.iter().zip(model.pmf().probs()).map(|(v, p)| v * v * p),
        );
        assert!((norm - 8.0).abs() < 1e-8, "E P_2² = {norm}");
    }

    #[test]
    fn fit_coefficients_examples() {
        let coeffs = fit_coefficients(0, &[0.0, 1.0, 4.0]).unwrap();
        assert!((coeffs[0]).abs() < 1e-12 && (coeffs[1]).abs() < 1e-12);
        assert!((coeffs[2] - 1.0).abs() < 1e-12);

        let coeffs = fit_coefficients(-1, &[-3.0, -2.0, -1.0]).unwrap();
        assert!((coeffs[0] + 2.0).abs() < 1e-12);
        assert!((coeffs[1] - 1.0).abs() < 1e-12);
        assert!(coeffs[2].abs() < 1e-12);
    }

    #[test]
    fn charlier_top_coefficient() {
        let model = poisson2();
        let basis = orthonormal_basis(&model, 2).unwrap();
        assert!((basis[2].coeffs[2] - 1.0).abs() < 1e-8);
        assert_eq!(basis[2].lead, 1.0);
    }

    #[test]
    fn orthonormal_basis_phi0_and_phi1() {
        let model = poisson2();
        let basis = orthonormal_basis(&model, 1).unwrap();
        for (idx, j) in model.window().iter().enumerate() {
            assert!((basis[0].standardized_values[idx] - 1.0).abs() < 1e-12);
            let expect = (j as f64 - 2.0) / 2.0f64.sqrt();
            assert!((basis[1].standardized_values[idx] - expect).abs() < 1e-9);
        }
        assert!(basis.iter().all(|p| p.d_k > 0.0));
    }

    #[test]
    fn gram_matrix_of_krawtchouk_system() {
        let model = binomial4();
        let basis = orthonormal_basis(&model, 4).unwrap();
        let probs = model.pmf().probs();
        for a in 0..=4 {
            for b in 0..=4 {
                let dot = crate::sum::kahan_sum(
                    basis[a]
                        .standardized_values
                        .iter()
                        .zip(&basis[b].standardized_values)
                        .zip(probs)
                        .map(|((x, y), p)| x * y * p),
                );
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "({a},{b}) -> {dot}");
            }
        }
    }

    #[test]
    fn coefficients_reproduce_values() {
        for model in [poisson2(), binomial4()] {
            let basis = orthonormal_basis(&model, 3).unwrap();
            for poly in &basis {
                let scale =
                    poly.values.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
                for (idx, j) in model.window().iter().enumerate() {
                    let horner = poly
                        .coeffs
                        .iter()
                        .rev()
                        .fold(0.0, |acc, &c| acc * j as f64 + c);
                    assert!(
                        (horner - poly.values[idx]).abs() <= 1e-8 * scale,
                        "k={} j={j}",
                        poly.degree
                    );
                }
            }
        }
    }

    #[test]
    fn transfer_constants_examples() {
        let model = poisson2();
        let tc = transfer_constants(&model, 3).unwrap();
        // m = 0 row is all ones
        assert!(tc.v[0].iter().all(|&x| (x - 1.0).abs() < 1e-12));
        // m=1, k=3: √(k/λ · (k-1)!·k/(k-1)!) = √(3·1/2) for λ=2
        let v31 = tc.v[1][2];
        assert!((v31 - 1.224744871391589).abs() < 1e-12, "{v31}");
        assert!((tc.lambda[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn difference_transfer_on_poisson_and_binomial() {
        for model in [poisson2(), binomial4()] {
            let n = model.max_order().map_or(4, |m| m.min(4)) as usize;
            let report = verify_difference_transfer(&model, n).unwrap();
            assert!(report.passed, "{:?}", report.entries);
        }
    }

    #[test]
    fn extended_identity_poisson_k1() {
        // both sides equal λ p(j): Σ_{i>j}(i-λ)p(i) = λ p(j)
        let model = poisson2();
        let report = verify_extended_identity(&model, 1).unwrap();
        assert!(report.max_discrepancy < 1e-9, "{}", report.max_discrepancy);
    }

    #[test]
    fn extended_identity_binomial_k2() {
        let report = verify_extended_identity(&binomial4(), 2).unwrap();
        assert!(report.max_discrepancy < 1e-9);
    }

    #[test]
    fn inversion_formula_examples() {
        let report = verify_inversion_formula(&poisson2(), 2).unwrap();
        assert!(report.max_discrepancy < 1e-9);
        let report = verify_inversion_formula(&binomial4(), 3).unwrap();
        assert!(report.max_discrepancy < 1e-9);
    }

    #[test]
    fn beyond_max_degree_vanishes_identically() {
        let model = binomial4();
        let norm = rodrigues_norm_raw(&model, 5);
        assert!(norm.abs() < 1e-16, "{norm}");
    }

    #[test]
    fn matches_gram_schmidt_oracle() {
        let model = binomial4();
        let basis = orthonormal_basis(&model, 4).unwrap();
        let gs = crate::oracle::gram_schmidt_basis(&model, 4).unwrap();
        for k in 0..=4 {
            let scale = gs[k].iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            for idx in 0..model.window().len() {
                assert!(
                    (basis[k].standardized_values[idx] - gs[k][idx]).abs() <= 1e-7 * scale,
                    "k={k} idx={idx}"
                );
            }
        }
    }
}
