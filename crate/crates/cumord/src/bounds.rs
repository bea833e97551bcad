//! The two-parameter family of variance bounds `S_{m,n}(g)`.
//!
//! For a class-C model and `g` in the numeric analogue of `H^{m,n}(X)`,
//!
//! ```text
//! S_{m,n}(g) = Σ_{i=1}^{m} κ_i E²[q^{[i]}(X) Δ^i g(X)]
//!            + Σ_{i=1}^{n} (-1)^{i-1} ν_i E[q^{[i]}(X)(Δ^i g(X))²],
//! ```
//!
//! satisfies `(-1)^n [Var g(X) - S_{m,n}(g)] ≥ 0` (upper bound for odd n,
//! lower for even), with equality iff g is a polynomial of degree ≤ m+n on
//! the support. The gap is the residual series
//! `R_{m,n}(g) = Σ_{k>m+n} r_{k;m,n} α_k²`, which is capped by
//! `u_τ E q^{[τ]}(Δ^τ g)²` and shrinks by the factor `ζ_{m1,m2,n}` as m
//! grows.

use crate::family::OrdModel;
use crate::fourier::{
    difference_energy_direct, effective_k_max, remainder_from_last_terms, spectrum, EnergyCheck,
    TestFunction,
};
use crate::moments::norm_constant_a;
use crate::oracle::brute_variance;
use crate::poly::lead_coefficient;
use crate::quad::{binomial_coefficient, descending_factorial, forward_difference};
use crate::sum::KahanSum;
use crate::{Error, Result};

/// `∏_{j=from}^{to-1} (1 - jδ)`; empty ranges give 1.
fn prod_one_minus(delta: f64, from: usize, to_exclusive: usize) -> f64 {
    let mut prod = 1.0;
    for j in from..to_exclusive {
        prod *= 1.0 - j as f64 * delta;
    }
    prod
}

/// The strictly positive weights κ_1..κ_m and ν_1..ν_n.
#[derive(Debug, Clone)]
pub struct BoundConstants {
    pub m: usize,
    pub n: usize,
    pub kappas: Vec<f64>,
    pub nus: Vec<f64>,
}

/// κ_i and ν_i of the bound `S_{m,n}`. Requires a class-C model and
/// `1 ≤ m + n ≤ M`; `n = 0` yields the Bessel-type weights
/// `κ_i = 1/(i! c_i(δ) A_i)`.
pub fn bound_constants(model: &OrdModel, m: usize, n: usize) -> Result<BoundConstants> {
    if !model.in_class_c() {
        return Err(Error::OutsideClassC);
    }
    if m + n == 0 {
        return Err(Error::InvalidInput("bound indices need m + n >= 1".into()));
    }
    model.require_degree(m + n)?;
    let delta = model.quadratic().delta;

    let mut kappas = Vec::with_capacity(m);
    for i in 1..=m {
        let numer = binomial_coefficient(m, i) * prod_one_minus(delta, m + i, m + n + i);
        let denom = descending_factorial((m + n) as f64, i)
            * norm_constant_a(model, i)?
            * lead_coefficient(delta, i)
            * prod_one_minus(delta, m, m + n);
        kappas.push(numer / denom);
    }
    let mut nus = Vec::with_capacity(n);
    for i in 1..=n {
        let numer = binomial_coefficient(n, i);
        let denom =
            descending_factorial((m + n) as f64, i) * prod_one_minus(delta, m, m + i);
        nus.push(numer / denom);
    }
    Ok(BoundConstants { m, n, kappas, nus })
}

/// `S_{m,n}(g)`. A diverging energy makes the bound trivial: `+∞` for odd
/// n, `-∞` for even n.
pub fn variance_bound(model: &OrdModel, g: &TestFunction, m: usize, n: usize) -> Result<f64> {
    let constants = bound_constants(model, m, n)?;
    match bound_from_parts(model, g, &constants) {
        Ok(value) => Ok(value),
        Err(Error::EnergyDiverged { .. }) => {
            Ok(if n % 2 == 1 { f64::INFINITY } else { f64::NEG_INFINITY })
        }
        Err(e) => Err(e),
    }
}

fn bound_from_parts(model: &OrdModel, g: &TestFunction, c: &BoundConstants) -> Result<f64> {
    let mut acc = KahanSum::new();
    for (i, kappa) in c.kappas.iter().enumerate() {
        let order = i + 1;
        let d = weighted_difference_expectation(model, g, order)?;
        acc.add(kappa * d * d);
    }
    for (i, nu) in c.nus.iter().enumerate() {
        let order = i + 1;
        let EnergyCheck { value, .. } = difference_energy_direct(model, g, order)?;
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        acc.add(sign * nu * value);
    }
    Ok(acc.value())
}

/// `E q^{[i]}(X) Δ^i g(X)` (the first-sum ingredient).
fn weighted_difference_expectation(model: &OrdModel, g: &TestFunction, i: usize) -> Result<f64> {
    let window = model.window();
    let gv: Vec<f64> = (window.lo..=window.hi + i as i64)
        .map(|j| g.eval(j))
        .collect::<Result<_>>()?;
    let di = forward_difference(&gv, i)?;
    let q = model.quadratic();
    let mut acc = KahanSum::new();
    for (idx, (j, p)) in model.pmf().iter().enumerate() {
        let term = q.ascending_power(i, j as f64) * di[idx] * p;
        if !term.is_finite() || term.abs() > 1e280 {
            return Err(Error::EnergyDiverged { order: i });
        }
        acc.add(term);
    }
    Ok(acc.value())
}

/// The residual weight `r_{k;m,n}`.
pub fn residual_weight(delta: f64, k: usize, m: usize, n: usize) -> f64 {
    let numer = descending_factorial((k - m - 1) as f64, n) * prod_one_minus(delta, m + k, m + n + k);
    let denom = descending_factorial((m + n) as f64, n) * prod_one_minus(delta, m, m + n);
    numer / denom
}

/// A partial residual series with its truncation bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct ResidualSeries {
    pub value: f64,
    pub k_max: usize,
    /// 0 when the series terminates at M; otherwise a geometric estimate of
    /// the dropped terms (crude when the terms are not decaying).
    pub remainder_estimate: f64,
}

/// `R_{m,n}(g) = Σ_{k=m+n+1}^{K} r_{k;m,n} α_k²`, which must equal
/// `(-1)^n (Var g - S_{m,n}(g))` up to the truncation remainder.
pub fn residual_series(
    model: &OrdModel,
    g: &TestFunction,
    m: usize,
    n: usize,
    k_max: Option<usize>,
) -> Result<ResidualSeries> {
    if !model.in_class_c() {
        return Err(Error::OutsideClassC);
    }
    model.require_degree(m + n)?;
    let k_max = effective_k_max(model, k_max).max(m + n);
    let spec = spectrum(model, g, k_max)?;
    let delta = model.quadratic().delta;
    let mut acc = KahanSum::new();
    let mut last_terms = (0.0f64, 0.0f64);
    for k in m + n + 1..=k_max {
        let term = residual_weight(delta, k, m, n) * spec.alphas[k] * spec.alphas[k];
        acc.add(term);
        last_terms = (last_terms.1, term);
    }
    let complete = model.max_order().is_some_and(|mm| k_max as u64 >= mm);
    Ok(ResidualSeries {
        value: acc.value(),
        k_max,
        remainder_estimate: remainder_from_last_terms(last_terms, complete),
    })
}

/// The cap coefficient `u_τ` of the residual bound.
pub fn residual_cap_coefficient(delta: f64, m: usize, n: usize, tau: usize) -> f64 {
    let numer = prod_one_minus(delta, 2 * m + n + 1, 2 * m + 2 * n + 1);
    let denom = binomial_coefficient(m + n, n)
        * descending_factorial((m + n + 1) as f64, tau)
        * prod_one_minus(delta, m, m + n + tau);
    numer / denom
}

/// `u_τ E q^{[τ]}(X)(Δ^τ g(X))² ≥ R_{m,n}(g)` for `n ≤ τ ≤ m+n+1`,
/// requiring `m + n < M`.
pub fn residual_cap(
    model: &OrdModel,
    g: &TestFunction,
    m: usize,
    n: usize,
    tau: usize,
) -> Result<f64> {
    if !model.in_class_c() {
        return Err(Error::OutsideClassC);
    }
    if tau < n || tau > m + n + 1 {
        return Err(Error::InvalidInput(format!(
            "residual cap needs n <= tau <= m+n+1, got tau={tau} for (m,n)=({m},{n})"
        )));
    }
    if let Some(mm) = model.max_order() {
        if (m + n) as u64 >= mm {
            return Err(Error::InvalidInput(
                "residual cap needs m + n < M (the residual is empty at m+n=M)".into(),
            ));
        }
    }
    model.require_degree(tau)?;
    let energy = difference_energy_direct(model, g, tau)?.value;
    Ok(residual_cap_coefficient(model.quadratic().delta, m, n, tau) * energy)
}

/// The guaranteed improvement factor `ζ_{m1,m2,n}` between bounds with the
/// same n. Returns `+∞` when `m2 + n ≥ M` (there `S_{m2,n} = Var` exactly
/// and the comparison is trivial).
pub fn comparison_factor(model: &OrdModel, m1: usize, m2: usize, n: usize) -> Result<f64> {
    if m1 >= m2 {
        return Err(Error::InvalidInput("comparison factor needs m1 < m2".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("comparison factor needs n >= 1".into()));
    }
    if !model.in_class_c() {
        return Err(Error::OutsideClassC);
    }
    model.require_degree(m2)?;
    let delta = model.quadratic().delta;
    let base = descending_factorial((m2 + n) as f64, n) * prod_one_minus(delta, m2, m2 + n)
        / (descending_factorial((m1 + n) as f64, n) * prod_one_minus(delta, m1, m1 + n));
    match model.max_order() {
        None => Ok(base),
        Some(mm) => {
            let mm = mm as usize;
            if m2 + n >= mm {
                return Ok(f64::INFINITY);
            }
            let numer = descending_factorial((mm - m1 - 1) as f64, n)
                * prod_one_minus(delta, m1 + mm, m1 + n + mm);
            let denom = descending_factorial((mm - m2 - 1) as f64, n)
                * prod_one_minus(delta, m2 + mm, m2 + n + mm);
            Ok(base * numer / denom)
        }
    }
}

/// One grid cell of a [`BoundReport`].
#[derive(Debug, Clone)]
pub struct BoundCell {
    pub m: usize,
    pub n: usize,
    pub s: f64,
    /// `(-1)^n (Var g - S_{m,n})`, from the brute-force variance.
    pub residual_direct: f64,
    /// The residual series, when the spectrum reaches past m+n.
    pub residual_series: Option<f64>,
    pub series_remainder: f64,
    /// `(τ, u_τ E q^{[τ]}(Δ^τ g)²)` for τ = n..=min(m+n+1, grid top).
    pub caps: Vec<(usize, f64)>,
    pub equality: bool,
}

/// One ζ-comparison row.
#[derive(Debug, Clone, Copy)]
pub struct ZetaEntry {
    pub m1: usize,
    pub m2: usize,
    pub n: usize,
    pub zeta: f64,
    /// `|Var - S_{m1,n}| - ζ |Var - S_{m2,n}|`, which must be ≥ -1e-9.
    pub margin: f64,
    pub ok: bool,
}

/// The full grid of bounds with every invariant checked.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub g_label: String,
    pub var_direct: f64,
    pub cells: Vec<BoundCell>,
    pub zetas: Vec<ZetaEntry>,
    /// Remark-style sandwich ordering across the grid.
    pub sandwich_ok: bool,
    /// Two-route residual agreement wherever the spectrum converged.
    pub residual_routes_ok: bool,
    /// Caps dominate the residual.
    pub caps_ok: bool,
    /// Every κ, ν, u, ζ and r weight positive.
    pub weights_positive: bool,
    /// Worst H^{m,n} membership heuristic margin seen (last-decade tail
    /// fraction of the energies).
    pub membership_margin: f64,
}

impl BoundReport {
    pub fn invariants_ok(&self) -> bool {
        self.sandwich_ok && self.residual_routes_ok && self.caps_ok && self.weights_positive
    }
}

const SIGN_SLACK: f64 = 1e-9;
const ROUTE_TOL: f64 = 1e-8;
const EQUALITY_TOL: f64 = 1e-8;

/// Runs the whole grid `m ≤ m_max`, `n ≤ n_max`, `1 ≤ m+n ≤ M`.
pub fn bound_report(
    model: &OrdModel,
    g: &TestFunction,
    m_max: usize,
    n_max: usize,
) -> Result<BoundReport> {
    if !model.in_class_c() {
        return Err(Error::OutsideClassC);
    }
    let var = {
        let gv: Vec<f64> = model
            .window()
            .iter()
            .map(|j| g.eval(j))
            .collect::<Result<_>>()?;
        let lo = model.window().lo;
        brute_variance(model, |j| gv[(j - lo) as usize])?.value
    };
    let var_scale = var.abs().max(1.0);
    let delta = model.quadratic().delta;
    let grid_cap = |k: usize| model.max_order().map_or(k, |mm| k.min(mm as usize));

    let mut cells = Vec::new();
    let mut weights_positive = true;
    let mut residual_routes_ok = true;
    let mut caps_ok = true;
    let mut sign_ok = true;
    let mut membership_margin = 0.0f64;

    for m in 0..=m_max {
        for n in 0..=n_max {
            if m + n == 0 || model.max_order().is_some_and(|mm| (m + n) as u64 > mm) {
                continue;
            }
            let constants = bound_constants(model, m, n)?;
            weights_positive &= constants.kappas.iter().all(|&k| k > 0.0)
                && constants.nus.iter().all(|&v| v > 0.0);
            for order in 1..=n.max(m) {
                membership_margin =
                    membership_margin.max(difference_energy_direct(model, g, order)?.tail_fraction);
            }
            let s = variance_bound(model, g, m, n)?;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let residual_direct = sign * (var - s);
            sign_ok &= residual_direct >= -SIGN_SLACK * var_scale;

            let (series, remainder) = if model.max_order().is_some_and(|mm| (m + n) as u64 == mm) {
                // empty sum at the boundary: S = Var exactly
                (Some(0.0), 0.0)
            } else {
                let rs = residual_series(model, g, m, n, None)?;
                for k in m + n + 1..=rs.k_max {
                    weights_positive &= residual_weight(delta, k, m, n) > 0.0;
                }
                (Some(rs.value), rs.remainder_estimate)
            };
            if let Some(series_value) = series {
                if remainder < 1e-10 {
                    residual_routes_ok &=
                        (series_value - residual_direct).abs() <= ROUTE_TOL * var_scale;
                }
            }

            let mut caps = Vec::new();
            if model.max_order().map_or(true, |mm| ((m + n) as u64) < mm) {
                for tau in n..=grid_cap(m + n + 1) {
                    let cap = residual_cap(model, g, m, n, tau)?;
                    weights_positive &= residual_cap_coefficient(delta, m, n, tau) > 0.0;
                    caps_ok &= residual_direct <= cap + SIGN_SLACK * var_scale;
                    caps.push((tau, cap));
                }
            }

            let equality = (var - s).abs() < EQUALITY_TOL * var_scale;
            cells.push(BoundCell {
                m,
                n,
                s,
                residual_direct,
                residual_series: series,
                series_remainder: remainder,
                caps,
                equality,
            });
        }
    }

    // monotone improvement in m at fixed n
    let mut monotone_ok = true;
    for n in 0..=n_max {
        let mut prev: Option<f64> = None;
        for m in 0..=m_max {
            if let Some(cell) = cells.iter().find(|c| c.m == m && c.n == n) {
                let gap = (var - cell.s).abs();
                if let Some(p) = prev {
                    monotone_ok &= gap <= p + SIGN_SLACK * var_scale;
                }
                prev = Some(gap);
            }
        }
    }

    let mut zetas = Vec::new();
    let mut zeta_ok = true;
    for n in 1..=n_max {
        for m1 in 0..m_max {
            for m2 in m1 + 1..=m_max {
                if model.max_order().is_some_and(|mm| (m2 + n) as u64 > mm) {
                    continue;
                }
                let zeta = comparison_factor(model, m1, m2, n)?;
                if !zeta.is_finite() {
                    continue;
                }
                weights_positive &= zeta > 0.0;
                let s1 = cells.iter().find(|c| c.m == m1 && c.n == n).map(|c| c.s);
                let s2 = cells.iter().find(|c| c.m == m2 && c.n == n).map(|c| c.s);
                if let (Some(s1), Some(s2)) = (s1, s2) {
                    let margin = (var - s1).abs() - zeta * (var - s2).abs();
                    let ok = margin >= -SIGN_SLACK * var_scale;
                    zeta_ok &= ok;
                    zetas.push(ZetaEntry { m1, m2, n, zeta, margin, ok });
                }
            }
        }
    }

    Ok(BoundReport {
        g_label: g.label(),
        var_direct: var,
        cells,
        zetas,
        sandwich_ok: sign_ok && monotone_ok && zeta_ok,
        residual_routes_ok,
        caps_ok,
        weights_positive,
        membership_margin,
    })
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
    fn constants_reduce_to_known_forms() {
        let model = poisson2();
        // δ=0, m=1, n=1: κ_1 = 1/(2 A_1), ν_1 = 1/2
        let c = bound_constants(&model, 1, 1).unwrap();
        assert!((c.kappas[0] - 0.25).abs() < 1e-12); // A_1 = λ = 2
        assert!((c.nus[0] - 0.5).abs() < 1e-12);
        // m=0: ν_i = 1/i! (the Poincaré weights at δ=0)
        let c = bound_constants(&model, 0, 3).unwrap();
        for (i, nu) in c.nus.iter().enumerate() {
            let expect = 1.0 / crate::quad::factorial(i + 1);
            assert!((nu - expect).abs() < 1e-12, "i={}", i + 1);
        }
        // m=2, n=1: ν_1 = 1/3
        let c = bound_constants(&model, 2, 1).unwrap();
        assert!((c.nus[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_square_bounds() {
        let model = poisson2();
        let g = TestFunction::Square;
        let upper = variance_bound(&model, &g, 0, 1).unwrap();
        assert!((upper - 66.0).abs() < 1e-9);
        let s11 = variance_bound(&model, &g, 1, 1).unwrap();
        assert!((s11 - 58.0).abs() < 1e-9);
        // Bessel lower bound at (m, n) = (1, 0): λ E²Δg / ... = 50
        let s10 = variance_bound(&model, &g, 1, 0).unwrap();
        assert!((s10 - 50.0).abs() < 1e-9);
    }

    #[test]
    fn linear_g_is_exact_everywhere() {
        let model = binomial4();
        let g = TestFunction::Identity;
        let var = brute_variance(&model, |j| j as f64).unwrap().value;
        for (m, n) in [(0, 1), (1, 0), (1, 1), (0, 2), (2, 1)] {
            let s = variance_bound(&model, &g, m, n).unwrap();
            assert!((s - var).abs() <= 1e-9, "({m},{n}): {s} vs {var}");
        }
    }

    #[test]
    fn residual_series_for_poisson_square() {
        let model = poisson2();
        let g = TestFunction::Square;
        let rs = residual_series(&model, &g, 0, 1, Some(8)).unwrap();
        assert!((rs.value - 8.0).abs() < 1e-8, "{}", rs.value);

        // polynomial g below the bound order leaves nothing
        let rs = residual_series(&model, &g, 1, 1, Some(8)).unwrap();
        assert!(rs.value.abs() < 1e-8);
    }

    #[test]
    fn residual_cap_examples() {
        let model = poisson2();
        let g = TestFunction::Square;
        // δ=0, (m,n)=(0,1), τ=1: u = 1/2, cap = 33 ≥ R = 8
        let cap = residual_cap(&model, &g, 0, 1, 1).unwrap();
        assert!((cap - 33.0).abs() < 1e-9, "{cap}");
        assert!(cap >= 8.0);
        let g3 = TestFunction::Cube;
        let cap = residual_cap(&model, &g3, 0, 1, 2).unwrap();
        let rs = residual_series(&model, &g3, 0, 1, Some(10)).unwrap();
        assert!(cap >= rs.value - 1e-9, "cap {cap} vs residual {}", rs.value);
    }

    #[test]
    fn comparison_factor_examples() {
        let model = poisson2();
        let z = comparison_factor(&model, 0, 1, 1).unwrap();
        assert!((z - 2.0).abs() < 1e-12);
        // Corollary instance: ζ_{0,n,n} at δ=0, M=∞ equals C(2n,n)
        for n in 1..=3usize {
            let z = comparison_factor(&model, 0, n, n).unwrap();
            let c2n = binomial_coefficient(2 * n, n);
            assert!((z - c2n).abs() <= 1e-12 * c2n, "n={n}: {z} vs {c2n}");
        }
    }

    #[test]
    fn comparison_inequality_for_cube() {
        let model = poisson2();
        let g = TestFunction::Cube;
        let var = brute_variance(&model, |j| (j * j * j) as f64).unwrap().value;
        let s01 = variance_bound(&model, &g, 0, 1).unwrap();
        let s11 = variance_bound(&model, &g, 1, 1).unwrap();
        let z = comparison_factor(&model, 0, 1, 1).unwrap();
        assert!((var - s01).abs() >= z * (var - s11).abs() - 1e-9);
    }

    #[test]
    fn report_on_poisson_square() {
        let model = poisson2();
        let report = bound_report(&model, &TestFunction::Square, 2, 2).unwrap();
        assert!((report.var_direct - 58.0).abs() < 1e-9);
        assert!(report.invariants_ok());
        for cell in &report.cells {
            // equality exactly at the cells that can represent degree 2
            assert_eq!(cell.equality, cell.m + cell.n >= 2, "({},{})", cell.m, cell.n);
        }
    }

    #[test]
    fn report_on_finite_support_boundary() {
        // m+n = M cells: empty residual, S = Var for every g
        let model = binomial4();
        let report = bound_report(&model, &TestFunction::Cube, 2, 2).unwrap();
        assert!(report.invariants_ok());
        for cell in &report.cells {
            if (cell.m + cell.n) as u64 == model.max_order().unwrap() {
                assert!(cell.equality, "({},{})", cell.m, cell.n);
                assert_eq!(cell.residual_series, Some(0.0));
            }
        }
    }

    #[test]
    fn monotone_convergence_in_m_for_poisson() {
        let model = poisson2();
        let g = TestFunction::ExpScaled { scale: crate::fourier::default_exp_scale(&model) };
        let var = {
            let gv: Vec<f64> =
                model.window().iter().map(|j| g.eval(j).unwrap()).collect();
            let lo = model.window().lo;
            brute_variance(&model, |j| gv[(j - lo) as usize]).unwrap().value
        };
        for n in 1..=2usize {
            let mut prev = f64::INFINITY;
            for m in 0..=6usize {
                let s = variance_bound(&model, &g, m, n).unwrap();
                let gap = (var - s).abs();
                assert!(gap <= prev + 1e-10, "m={m} n={n}: {gap} vs {prev}");
                prev = gap;
            }
        }
    }

    #[test]
    fn class_c_gate() {
        let model = OrdModel::new(1.0, Quadratic::new(1.0, 0.0, 1.0)).unwrap();
        assert!(matches!(
            bound_constants(&model, 1, 1),
            Err(Error::OutsideClassC)
        ));
    }
}
