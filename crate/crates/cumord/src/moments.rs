//! Closed-form variance, the norm constants `A_k = E q^{[k]}(X)`, and the
//! factorial-moment recurrences.
//!
//! Every quantity here has an independent brute-force route in
//! [`crate::oracle`]; the suite compares the two.

use crate::family::OrdModel;
use crate::quad::{ascending_factorial, descending_factorial};
use crate::{Error, Result};

/// Factorial and raw moments up to a maximal order.
#[derive(Debug, Clone)]
pub struct MomentTable {
    /// Descending factorial moments `μ_(r) = E (X)_r`, index r.
    pub descending: Vec<f64>,
    /// Ascending factorial moments `μ_[r] = E [X]_r`, index r.
    pub ascending: Vec<f64>,
    /// Raw moments `E X^r`, from the descending table via Stirling numbers.
    pub raw: Vec<f64>,
    pub max_order: usize,
}

/// `Var X = q(μ)/(1-δ)`, also `E q(X)`.
pub fn variance(model: &OrdModel) -> Result<f64> {
    model.budget().require(2.0)?;
    let q = model.quadratic();
    Ok(q.eval(model.mu()) / (1.0 - q.delta))
}

/// The mean of the derived distribution `X_t`:
/// `(-δt² + (β+1)t + μ)/(1-2tδ)`.
fn derived_mean(model: &OrdModel, t: usize) -> f64 {
    let q = model.quadratic();
    let t = t as f64;
    (-q.delta * t * t + (q.beta + 1.0) * t + model.mu()) / (1.0 - 2.0 * t * q.delta)
}

/// `Var X_i = q(μ'_i)/(1-(2i+1)δ)` in closed form.
pub fn variance_derived(model: &OrdModel, i: usize) -> Result<f64> {
    model.require_degree(i)?;
    model.budget().require(2.0 * i as f64 + 2.0)?;
    let q = model.quadratic();
    Ok(q.eval(derived_mean(model, i)) / (1.0 - (2.0 * i as f64 + 1.0) * q.delta))
}

/// The positive norm constant `A_k = E q^{[k]}(X)` as the closed telescoping
/// product `∏_{t=0}^{k-1} (1-2tδ) q(μ'_t) / (1-(2t+1)δ)`; `A_0 = 1`.
pub fn norm_constant_a(model: &OrdModel, k: usize) -> Result<f64> {
    model.require_degree(k)?;
    model.budget().require(2.0 * k as f64)?;
    let q = model.quadratic();
    let mut prod = 1.0;
    for t in 0..k {
        let tf = t as f64;
        prod *= (1.0 - 2.0 * tf * q.delta) * q.eval(derived_mean(model, t))
            / (1.0 - (2.0 * tf + 1.0) * q.delta);
    }
    Ok(prod)
}

/// Descending factorial moments by the second-order recurrence
///
/// ```text
/// [1-(r-1)δ] μ_(r) = {μ + (r-1)[β + (2r-3)δ - 1]} μ_(r-1)
///                    + (r-1){γ + (r-2)[β + (r-2)δ]} μ_(r-2),
/// ```
///
/// with `μ_(0) = 1`, `μ_(1) = μ`.
pub fn descending_moments(model: &OrdModel, max_order: usize) -> Result<MomentTable> {
    moment_table(model, max_order)
}

/// Ascending factorial moments by the full-history recurrence
///
/// ```text
/// [1-(r-1)δ] μ_[r] = {μ + (r-1)[1 + β - (r-1)δ]} μ_[r-1]
///                    + γ Σ_{k=0}^{r-2} (r-1)_{r-k-1} μ_[k],
/// ```
///
/// with `μ_[0] = 1`, `μ_[1] = μ`.
pub fn ascending_moments(model: &OrdModel, max_order: usize) -> Result<MomentTable> {
    moment_table(model, max_order)
}

fn moment_table(model: &OrdModel, max_order: usize) -> Result<MomentTable> {
    model.budget().require(max_order as f64)?;
    let q = model.quadratic();
    let (delta, beta, gamma) = (q.delta, q.beta, q.gamma);
    let mu = model.mu();

    let mut desc = vec![1.0];
    let mut asc = vec![1.0];
    if max_order >= 1 {
        desc.push(mu);
        asc.push(mu);
    }
    for r in 2..=max_order {
        let rf = r as f64;
        let lead = 1.0 - (rf - 1.0) * delta;
        if lead == 0.0 {
            return Err(Error::DegenerateRecurrence { order: r });
        }
        let d = {
            let c1 = mu + (rf - 1.0) * (beta + (2.0 * rf - 3.0) * delta - 1.0);
            let c2 = (rf - 1.0) * (gamma + (rf - 2.0) * (beta + (rf - 2.0) * delta));
            (c1 * desc[r - 1] + c2 * desc[r - 2]) / lead
        };
        desc.push(d);
        let a = {
            let c1 = mu + (rf - 1.0) * (1.0 + beta - (rf - 1.0) * delta);
            let mut tail = 0.0;
            for k in 0..=r - 2 {
                tail += descending_factorial(rf - 1.0, r - k - 1) * asc[k];
            }
            (c1 * asc[r - 1] + gamma * tail) / lead
        };
        asc.push(a);
    }

    let raw = raw_from_descending(&desc);
    Ok(MomentTable { descending: desc, ascending: asc, raw, max_order })
}

/// Raw moments from descending factorial moments via Stirling numbers of
/// the second kind: `E X^n = Σ_k S(n,k) μ_(k)`.
fn raw_from_descending(desc: &[f64]) -> Vec<f64> {
    let n = desc.len();
    let stirling = stirling_second_kind(n);
    (0..n)
        .map(|order| (0..=order).map(|k| stirling[order][k] * desc[k]).sum())
        .collect()
}

/// Table of S(n, k) for 0 ≤ k ≤ n < rows.
fn stirling_second_kind(rows: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; rows]; rows];
    s[0][0] = 1.0;
    for n in 1..rows {
        for k in 1..=n {
            s[n][k] = k as f64 * s[n - 1][k] + s[n - 1][k - 1];
        }
    }
    s
}

/// Direct-summation factorial moment over the pmf window (shared by the
/// tests and the verification suite).
pub fn factorial_moment_direct(model: &OrdModel, r: usize, ascending: bool) -> f64 {
    crate::sum::kahan_sum(model.pmf().iter().map(|(j, p)| {
        let f = if ascending {
            ascending_factorial(j as f64, r)
        } else {
            descending_factorial(j as f64, r)
        };
        f * p
    }))
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
    fn variance_closed_forms() {
        assert!((variance(&poisson2()).unwrap() - 2.0).abs() < 1e-12);
        assert!((variance(&binomial4()).unwrap() - 1.0).abs() < 1e-12);
        // NegBin r=1, p=0.5: (μ=1, q=1+j) has variance 2 = r(1-p)/p²
        let nb = OrdModel::new(1.0, Quadratic::new(0.0, 1.0, 1.0)).unwrap();
        assert!((variance(&nb).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn variance_is_expected_q() {
        for model in [poisson2(), binomial4()] {
            let eq = crate::sum::kahan_sum(
                model.pmf().iter().map(|(j, p)| model.quadratic().eval(j as f64) * p),
            );
            assert!((variance(&model).unwrap() - eq).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_constant_examples() {
        assert_eq!(norm_constant_a(&poisson2(), 0).unwrap(), 1.0);
        assert!((norm_constant_a(&poisson2(), 3).unwrap() - 8.0).abs() < 1e-12);
        assert!((norm_constant_a(&binomial4(), 2).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn norm_constant_matches_direct_summation() {
        for model in [poisson2(), binomial4()] {
            for k in 0..=4usize {
                if model.require_degree(k).is_err() {
                    continue;
                }
                let direct = crate::sum::kahan_sum(
                    model
                        .pmf()
                        .iter()
                        .map(|(j, p)| model.quadratic().ascending_power(k, j as f64) * p),
                );
                let closed = norm_constant_a(&model, k).unwrap();
                assert!(
                    (closed - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                    "k={k}: {closed} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn poisson_descending_moments_are_powers() {
        let table = descending_moments(&poisson2(), 6).unwrap();
        for (r, d) in table.descending.iter().enumerate() {
            let expect = 2.0f64.powi(r as i32);
            assert!((d - expect).abs() <= 1e-10 * expect, "r={r}: {d}");
        }
    }

    #[test]
    fn first_order_is_the_mean() {
        let table = descending_moments(&binomial4(), 1).unwrap();
        assert_eq!(table.descending[1], 2.0);
        assert_eq!(table.ascending[1], 2.0);
    }

    #[test]
    fn binomial_second_descending_moment() {
        // E X(X-1) = N(N-1)p² = 3
        let table = descending_moments(&binomial4(), 2).unwrap();
        assert!((table.descending[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn recurrences_match_direct_summation() {
        for model in [
            poisson2(),
            binomial4(),
            OrdModel::new(2.25, Quadratic::new(0.0, 1.5, 2.25)).unwrap(),
            OrdModel::new(2.4, Quadratic::new(-0.2, 0.8, 2.4)).unwrap(),
            OrdModel::new(20.0 / 11.0, Quadratic::new(1.0 / 11.0, -9.0 / 11.0, 20.0 / 11.0))
                .unwrap(),
        ] {
            let table = descending_moments(&model, 6).unwrap();
            for r in 0..=6 {
                let dd = factorial_moment_direct(&model, r, false);
                let da = factorial_moment_direct(&model, r, true);
                assert!(
                    (table.descending[r] - dd).abs() <= 1e-9 * dd.abs().max(1.0),
                    "descending r={r}: {} vs {dd}",
                    table.descending[r]
                );
                assert!(
                    (table.ascending[r] - da).abs() <= 1e-9 * da.abs().max(1.0),
                    "ascending r={r}: {} vs {da}",
                    table.ascending[r]
                );
            }
        }
    }

    #[test]
    fn raw_moments_match_power_sums() {
        for model in [poisson2(), binomial4()] {
            let table = descending_moments(&model, 6).unwrap();
            for r in 0..=6 {
                let direct = crate::sum::kahan_sum(
                    model.pmf().iter().map(|(j, p)| (j as f64).powi(r as i32) * p),
                );
                assert!(
                    (table.raw[r] - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                    "raw r={r}"
                );
            }
        }
    }

    #[test]
    fn derived_variance_two_routes() {
        for model in [poisson2(), binomial4()] {
            for i in 0..=2usize {
                if model.require_degree(i + 1).is_err() {
                    continue;
                }
                let closed = variance_derived(&model, i).unwrap();
                let derived = model.derive(i).unwrap();
                let fresh = variance(&derived).unwrap();
                assert!(
                    (closed - fresh).abs() <= 1e-10 * fresh.abs().max(1.0),
                    "i={i}: {closed} vs {fresh}"
                );
            }
        }
    }

    #[test]
    fn telescoping_product_identity() {
        // (1-2jδ) Var X_j = A_{j+1}/A_j
        for model in [
            poisson2(),
            binomial4(),
            OrdModel::new(2.4, Quadratic::new(-0.2, 0.8, 2.4)).unwrap(),
        ] {
            let max = model.max_order().map_or(3, |m| m.saturating_sub(1).min(3)) as usize;
            for j in 0..=max {
                let lhs = (1.0 - 2.0 * j as f64 * model.quadratic().delta)
                    * variance_derived(&model, j).unwrap();
                let rhs = norm_constant_a(&model, j + 1).unwrap() / norm_constant_a(&model, j).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "j={j}");
            }
        }
    }

    #[test]
    fn budget_gates_moments() {
        // CO(1; 1,0,1) has finite moments only below 1 + 1/δ = 2
        let model = OrdModel::new(1.0, Quadratic::new(1.0, 0.0, 1.0)).unwrap();
        assert!(matches!(variance(&model), Err(Error::MomentBudgetExceeded { .. })));
        assert!(descending_moments(&model, 1).is_ok());
        assert!(matches!(
            descending_moments(&model, 3),
            Err(Error::MomentBudgetExceeded { .. })
        ));
    }
}
