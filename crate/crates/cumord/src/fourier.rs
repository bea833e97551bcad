//! Fourier coefficients, Parseval sums and weighted difference energies.
//!
//! The covariance identity `E P_k(X) g(X) = E q^{[k]}(X) Δ^k g(X)` makes the
//! Fourier coefficient `α_k = E φ_k(X) g(X)` computable without knowing the
//! polynomial:
//!
//! ```text
//! α_k = E q^{[k]}(X) Δ^k g(X) / (k! c_k(δ) A_k)^{1/2}.
//! ```
//!
//! For class-C models (δ ≤ 0 or finite support) the polynomials are dense in
//! L², Parseval gives `Var g(X) = Σ_{k≥1} α_k²`, and the weighted difference
//! energy expands as
//! `E q^{[i]}(X)(Δ^i g(X))² = Σ_{k≥i} k!/(k-i)! ∏_{j=k-1}^{k+i-2}(1-jδ) α_k²`.

use crate::expr::{self, Expr};
use crate::family::OrdModel;
use crate::moments::norm_constant_a;
use crate::poly::{lead_coefficient, orthonormal_basis};
use crate::quad::{factorial, forward_difference};
use crate::sum::{kahan_sum, KahanSum};
use crate::{Error, Result};

/// Energies beyond this guard mean g is outside the numeric H^{m,n}.
const ENERGY_GUARD: f64 = 1e280;

/// A real test function on the support.
#[derive(Debug, Clone)]
pub enum TestFunction {
    /// g(x) = x
    Identity,
    /// g(x) = x²
    Square,
    /// g(x) = x³
    Cube,
    /// g(x) = |x - center|
    AbsDeviation { center: f64 },
    /// g(x) = exp(x/scale)
    ExpScaled { scale: f64 },
    /// g(x) = 1 when x ≥ threshold
    Indicator { threshold: f64 },
    /// a parsed expression in x
    Expression { text: String, expr: Expr },
    /// a value table on consecutive integers starting at `first`
    Table { first: i64, values: Vec<f64> },
}

impl TestFunction {
    pub fn expression(text: &str) -> Result<Self> {
        Ok(TestFunction::Expression { text: text.to_string(), expr: expr::parse(text)? })
    }

    /// Builtin by name: `x`, `x2`, `x3`, `absdev`, `exp`, `indicator`.
    /// `absdev`, `exp` and `indicator` take their center/scale/threshold
    /// from `param`.
    pub fn builtin(name: &str, param: Option<f64>) -> Result<Self> {
        match name {
            "x" => Ok(TestFunction::Identity),
            "x2" => Ok(TestFunction::Square),
            "x3" => Ok(TestFunction::Cube),
            "absdev" => Ok(TestFunction::AbsDeviation { center: param.unwrap_or(0.0) }),
            "exp" => Ok(TestFunction::ExpScaled { scale: param.unwrap_or(1.0) }),
            "indicator" => Ok(TestFunction::Indicator { threshold: param.unwrap_or(0.0) }),
            _ => Err(Error::InvalidInput(format!(
                "unknown builtin '{name}' (expected x, x2, x3, absdev, exp, indicator)"
            ))),
        }
    }

    pub fn eval(&self, j: i64) -> Result<f64> {
        let x = j as f64;
        Ok(match self {
            TestFunction::Identity => x,
            TestFunction::Square => x * x,
            TestFunction::Cube => x * x * x,
            TestFunction::AbsDeviation { center } => (x - center).abs(),
            TestFunction::ExpScaled { scale } => (x / scale).exp(),
            TestFunction::Indicator { threshold } => {
                if x >= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Expression { expr, .. } => expr.eval(x),
            TestFunction::Table { first, values } => {
                let hi = first + values.len() as i64 - 1;
                return match j.checked_sub(*first) {
                    Some(idx) if j <= hi && idx >= 0 => Ok(values[idx as usize]),
                    _ => Err(Error::FunctionDomain { at: j, lo: *first, hi }),
                };
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::Identity => "x".into(),
            TestFunction::Square => "x^2".into(),
            TestFunction::Cube => "x^3".into(),
            TestFunction::AbsDeviation { center } => format!("|x-{center}|"),
            TestFunction::ExpScaled { scale } => format!("exp(x/{scale})"),
            TestFunction::Indicator { threshold } => format!("1{{x>={threshold}}}"),
            TestFunction::Expression { text, .. } => text.clone(),
            TestFunction::Table { .. } => "table".into(),
        }
    }

    /// The builtin suite: polynomial equality cases plus strict-inequality
    /// cases. The exponential scale and the indicator threshold are chosen
    /// from the model so the energies stay well inside the overflow guard.
    pub fn suite(model: &OrdModel) -> Vec<TestFunction> {
        vec![
            TestFunction::Identity,
            TestFunction::Square,
            TestFunction::Cube,
            TestFunction::AbsDeviation { center: model.mu() },
            TestFunction::ExpScaled { scale: default_exp_scale(model) },
            TestFunction::Indicator { threshold: model.mu().ceil() },
        ]
    }
}

/// A scale c for exp(x/c) under which the window energies stay finite: the
/// window half-width keeps |x|/c ≤ 60, and for a geometric-ratio tail the
/// analytic sums converge as well.
pub fn default_exp_scale(model: &OrdModel) -> f64 {
    let window = model.window();
    let reach = (window.lo.abs().max(window.hi.abs()) as f64).max(1.0);
    let mut scale: f64 = reach / 60.0;
    let q = model.quadratic();
    let ql = model.companion();
    if model.support().omega.is_none() {
        // limit of the pmf ratio q(j)/q̲(j+1) as j → ∞ (δ = 0 here for
        // class-C models; a positive limit means a geometric tail)
        let j = window.hi as f64;
        let ratio = q.eval(j) / ql.eval(j + 1.0);
        if ratio > 0.0 && ratio < 1.0 {
            // need exp(2/c) ratio < 1 with margin
            scale = scale.max(2.2 / (1.0 / ratio).ln());
        }
    }
    scale.max(1.0)
}

/// Which route computes a Fourier coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// `E q^{[k]} Δ^k g / norm` via the covariance identity.
    DifferenceIdentity,
    /// `Σ_j φ_k(j) g(j) p(j)` by direct projection.
    DirectProjection,
}

/// g evaluated on `[window.lo, window.hi + extra]`.
fn g_table(model: &OrdModel, g: &TestFunction, extra: usize) -> Result<Vec<f64>> {
    let window = model.window();
    (window.lo..=window.hi + extra as i64).map(|j| g.eval(j)).collect()
}

/// `E q^{[k]}(X) Δ^k g(X)` over the window.
fn difference_expectation(model: &OrdModel, g: &TestFunction, k: usize) -> Result<f64> {
    let gv = g_table(model, g, k)?;
    let dk = forward_difference(&gv, k)?;
    let q = model.quadratic();
    let mut acc = KahanSum::new();
    for (idx, (j, p)) in model.pmf().iter().enumerate() {
        let term = q.ascending_power(k, j as f64) * dk[idx] * p;
        if !term.is_finite() || term.abs() > ENERGY_GUARD {
            return Err(Error::EnergyDiverged { order: k });
        }
        acc.add(term);
    }
    Ok(acc.value())
}

/// The energy `E q^{[i]}(X)(Δ^i g(X))²` with the fraction contributed by
/// the outermost decade of each truncated side (the runtime membership
/// heuristic for the numeric H^{m,n}).
#[derive(Debug, Clone, Copy)]
pub struct EnergyCheck {
    pub value: f64,
    pub tail_fraction: f64,
}

/// Direct route to `E q^{[i]}(X)(Δ^i g(X))²`.
pub fn difference_energy_direct(
    model: &OrdModel,
    g: &TestFunction,
    i: usize,
) -> Result<EnergyCheck> {
    let gv = g_table(model, g, i)?;
    let di = forward_difference(&gv, i)?;
    let q = model.quadratic();
    let window = model.window();
    let mut acc = KahanSum::new();
    let mut tail = KahanSum::new();
    let len = window.len();
    let decade = len.div_ceil(10);
    for (idx, (j, p)) in model.pmf().iter().enumerate() {
        let d = di[idx];
        let term = q.ascending_power(i, j as f64) * d * d * p;
        if !term.is_finite() || term.abs() > ENERGY_GUARD {
            return Err(Error::EnergyDiverged { order: i });
        }
        acc.add(term);
        let in_lo_decade = window.lo_truncated && idx < decade;
        let in_hi_decade = window.hi_truncated && idx + decade >= len;
        if in_lo_decade || in_hi_decade {
            tail.add(term);
        }
    }
    let value = acc.value();
    let tail_fraction = if value > 0.0 { tail.value() / value } else { 0.0 };
    Ok(EnergyCheck { value, tail_fraction })
}

/// Normalization `(k! c_k(δ) A_k)^{1/2}` of the k-th coefficient.
fn coefficient_norm(model: &OrdModel, k: usize) -> Result<f64> {
    let c_k = lead_coefficient(model.quadratic().delta, k);
    Ok((factorial(k) * c_k * norm_constant_a(model, k)?).sqrt())
}

/// The Fourier coefficient `α_k = E φ_k(X) g(X)` by either route.
pub fn fourier_coefficient(
    model: &OrdModel,
    g: &TestFunction,
    k: usize,
    route: Route,
) -> Result<f64> {
    model.require_degree(k)?;
    model.budget().require(2.0 * k as f64)?;
    match route {
        Route::DifferenceIdentity => {
            Ok(difference_expectation(model, g, k)? / coefficient_norm(model, k)?)
        }
        Route::DirectProjection => {
            let basis = orthonormal_basis(model, k)?;
            let gv = g_table(model, g, 0)?;
            Ok(kahan_sum(
                model
                    .pmf()
                    .probs()
                    .iter()
                    .zip(&basis[k].standardized_values)
                    .zip(&gv)
                    .map(|((p, phi), gj)| phi * gj * p),
            ))
        }
    }
}

/// The spectrum α_0..α_K with both routes and their worst disagreement.
#[derive(Debug, Clone)]
pub struct FourierSpectrum {
    /// Difference-identity route (the stored route).
    pub alphas: Vec<f64>,
    /// Direct projections, for cross-checking.
    pub alphas_direct: Vec<f64>,
    pub k_max: usize,
    pub max_route_discrepancy: f64,
    /// `Σ_{k=1}^{K} α_k²`, nondecreasing in K.
    pub partial_parseval: f64,
}

/// Computes both routes for every k ≤ K.
pub fn spectrum(model: &OrdModel, g: &TestFunction, k_max: usize) -> Result<FourierSpectrum> {
    model.require_degree(k_max)?;
    model.budget().require(2.0 * k_max as f64)?;
    let basis = orthonormal_basis(model, k_max)?;
    let gv = g_table(model, g, k_max)?;
    let probs = model.pmf().probs();

    let mut alphas = Vec::with_capacity(k_max + 1);
    let mut alphas_direct = Vec::with_capacity(k_max + 1);
    let mut worst = 0.0f64;
    let mut parseval = KahanSum::new();
    for k in 0..=k_max {
        let alpha = difference_expectation(model, g, k)? / coefficient_norm(model, k)?;
        let direct = kahan_sum(
            probs
                .iter()
                .zip(&basis[k].standardized_values)
                .zip(&gv)
                .map(|((p, phi), gj)| phi * gj * p),
        );
        worst = worst.max((alpha - direct).abs());
        if k >= 1 {
            parseval.add(alpha * alpha);
        }
        alphas.push(alpha);
        alphas_direct.push(direct);
    }
    Ok(FourierSpectrum {
        alphas,
        alphas_direct,
        k_max,
        max_route_discrepancy: worst,
        partial_parseval: parseval.value(),
    })
}

/// Both routes to the weighted difference energy.
#[derive(Debug, Clone, Copy)]
pub struct DifferenceEnergy {
    /// `Σ_j q^{[i]}(j) (Δ^i g(j))² p(j)`
    pub direct: f64,
    /// `Σ_{k=i}^{K} k!/(k-i)! ∏_{j=k-1}^{k+i-2}(1-jδ) α_k²`
    pub series: f64,
    pub series_k_max: usize,
    /// Estimated truncation remainder of the series (0 when the series is
    /// complete at K = M).
    pub remainder_estimate: f64,
}

/// The series weight `k!/(k-i)! ∏_{j=k-1}^{k+i-2}(1-jδ)`.
pub fn energy_series_weight(delta: f64, k: usize, i: usize) -> f64 {
    let mut w = factorial(k) / factorial(k - i);
    if i >= 1 {
        for j in k - 1..=k + i - 2 {
            w *= 1.0 - j as f64 * delta;
        }
    }
    w
}

/// Series route requires a class-C model; `k_max` defaults to `min(12, M)`.
pub fn difference_energy(
    model: &OrdModel,
    g: &TestFunction,
    i: usize,
    k_max: Option<usize>,
) -> Result<DifferenceEnergy> {
    if !model.in_class_c() {
        return Err(Error::OutsideClassC);
    }
    model.require_degree(i)?;
    let k_max = effective_k_max(model, k_max);
    let direct = difference_energy_direct(model, g, i)?.value;
    let spec = spectrum(model, g, k_max)?;
    let delta = model.quadratic().delta;
    let mut acc = KahanSum::new();
    let mut last_terms = (0.0f64, 0.0f64);
    for k in i..=k_max {
        let term = energy_series_weight(delta, k, i) * spec.alphas[k] * spec.alphas[k];
        acc.add(term);
        last_terms = (last_terms.1, term);
    }
    let complete = model.max_order().is_some_and(|m| k_max as u64 >= m);
    let remainder_estimate = remainder_from_last_terms(last_terms, complete);
    Ok(DifferenceEnergy { direct, series: acc.value(), series_k_max: k_max, remainder_estimate })
}

/// Default truncation degree: 12 or M, whichever is smaller.
pub fn effective_k_max(model: &OrdModel, k_max: Option<usize>) -> usize {
    let wanted = k_max.unwrap_or(12);
    match model.max_order() {
        Some(m) => wanted.min(m as usize),
        None => wanted,
    }
}

/// Geometric-ratio estimate of a truncated series remainder; never silently
/// dropped, crude (the last term itself) when the terms are not decaying.
pub fn remainder_from_last_terms((prev, last): (f64, f64), complete: bool) -> f64 {
    if complete {
        return 0.0;
    }
    let last = last.abs();
    if prev.abs() > 0.0 {
        let ratio = last / prev.abs();
        if ratio < 0.9 {
            return last * ratio / (1.0 - ratio);
        }
    }
    last.max(f64::MIN_POSITIVE)
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
    fn constant_g_has_zero_coefficients() {
        let model = poisson2();
        let g = TestFunction::expression("3.5").unwrap();
        for k in 1..=3 {
            let a = fourier_coefficient(&model, &g, k, Route::DifferenceIdentity).unwrap();
            assert!(a.abs() < 1e-12, "k={k}: {a}");
        }
    }

    #[test]
    fn poisson_square_coefficients() {
        let model = poisson2();
        let g = TestFunction::Square;
        let a1 = fourier_coefficient(&model, &g, 1, Route::DifferenceIdentity).unwrap();
        assert!((a1 - 7.0710678118654755).abs() < 1e-9, "{a1}");
        let a2 = fourier_coefficient(&model, &g, 2, Route::DifferenceIdentity).unwrap();
        assert!((a2 * a2 - 8.0).abs() < 1e-9, "{a2}");
        for route in [Route::DifferenceIdentity, Route::DirectProjection] {
            let a3 = fourier_coefficient(&model, &g, 3, route).unwrap();
            assert!(a3.abs() < 1e-8, "{a3}");
        }
    }

    #[test]
    fn alpha0_is_the_mean_of_g() {
        let model = binomial4();
        let g = TestFunction::Cube;
        let spec = spectrum(&model, &g, 4).unwrap();
        let eg = crate::oracle::brute_expectation(&model, |j| (j * j * j) as f64).unwrap();
        assert!((spec.alphas[0] - eg.value).abs() <= 1e-9 * eg.value.abs().max(1.0));
    }

    #[test]
    fn routes_agree_across_suite() {
        for model in [poisson2(), binomial4()] {
            let k_max = effective_k_max(&model, Some(5));
            for g in TestFunction::suite(&model) {
                let spec = spectrum(&model, &g, k_max).unwrap();
                assert!(
                    spec.max_route_discrepancy <= 1e-8 * (1.0 + spec.alphas[0].abs()),
                    "g={} disc={}",
                    g.label(),
                    spec.max_route_discrepancy
                );
            }
        }
    }

    #[test]
    fn parseval_for_polynomials() {
        let model = binomial4();
        let g = TestFunction::Cube;
        let spec = spectrum(&model, &g, 4).unwrap();
        let var = crate::oracle::brute_variance(&model, |j| (j * j * j) as f64).unwrap();
        assert!(
            (spec.partial_parseval - var.value).abs() <= 1e-9 * var.value.max(1.0),
            "{} vs {}",
            spec.partial_parseval,
            var.value
        );
    }

    #[test]
    fn energy_identity_for_poisson_square() {
        let model = poisson2();
        let g = TestFunction::Square;
        let e1 = difference_energy(&model, &g, 1, Some(6)).unwrap();
        assert!((e1.direct - 66.0).abs() < 1e-9, "direct {}", e1.direct);
        assert!((e1.series - 66.0).abs() < 1e-8, "series {}", e1.series);
        let e2 = difference_energy(&model, &g, 2, Some(6)).unwrap();
        assert!((e2.direct - 16.0).abs() < 1e-9);
        assert!((e2.series - 16.0).abs() < 1e-8);
        let e0 = difference_energy(&model, &g, 0, Some(8)).unwrap();
        let eg2 = crate::oracle::brute_expectation(&model, |j| ((j * j) * (j * j)) as f64)
            .unwrap()
            .value;
        assert!((e0.direct - eg2).abs() <= 1e-9 * eg2);
        assert!((e0.series - eg2).abs() <= 1e-7 * eg2);
    }

    #[test]
    fn class_c_gate_on_series_route() {
        let model = OrdModel::new(1.0, Quadratic::new(1.0, 0.0, 1.0)).unwrap();
        let g = TestFunction::Identity;
        assert!(matches!(
            difference_energy(&model, &g, 0, Some(2)),
            Err(Error::OutsideClassC)
        ));
    }

    #[test]
    fn transfer_of_fourier_coefficients() {
        // E φ_{k-i,i}(X_i) Δ^i g(X_i) = v^{(i)}_{k-i} α_k
        for model in [poisson2(), binomial4()] {
            let g = TestFunction::Cube;
            let k_hi = effective_k_max(&model, Some(4));
            let spec = spectrum(&model, &g, k_hi).unwrap();
            let tc = crate::poly::transfer_constants(&model, k_hi).unwrap();
            for i in 1..=k_hi {
                let derived = model.derive(i).unwrap();
                let basis = orthonormal_basis(&derived, k_hi - i).unwrap();
                let gv = g_table(&model, &g, i).unwrap();
                let di = forward_difference(&gv, i).unwrap();
                for k in i..=k_hi {
                    let lhs = kahan_sum(derived.pmf().iter().map(|(j, p)| {
                        let offset = (j - model.window().lo) as usize;
                        let phi = basis[k - i].standardized_values
                            [derived.window().index_of(j).unwrap()];
                        phi * di[offset] * p
                    }));
                    let rhs = tc.v[i][k - i] * spec.alphas[k];
                    assert!(
                        (lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0),
                        "i={i} k={k}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn monotone_l2_chain() {
        // finite energy at order i implies finite energies below i
        for model in [poisson2(), binomial4()] {
            for g in TestFunction::suite(&model) {
                let top = effective_k_max(&model, Some(3));
                if difference_energy_direct(&model, &g, top).is_ok() {
                    for i in 0..top {
                        assert!(difference_energy_direct(&model, &g, i).is_ok());
                    }
                }
            }
        }
    }

    #[test]
    fn table_source_must_cover_required_window() {
        let model = binomial4();
        let g = TestFunction::Table { first: 0, values: vec![0.0, 1.0, 8.0, 27.0, 64.0] };
        // Δ¹ needs one point beyond the window top
        assert!(matches!(
            difference_expectation(&model, &g, 1),
            Err(Error::FunctionDomain { at: 5, .. })
        ));
        assert!(difference_expectation(&model, &g, 0).is_ok());
    }
}
