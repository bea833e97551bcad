//! Admissibility, classification and pmf construction for `CO(μ; q)`.
//!
//! The admissibility algorithm: with `q̲(j) = q(j) + j - μ`,
//!
//! ```text
//! α = sup{ j ∈ (-∞, μ] ∩ ℤ : q̲(j) = 0 },   ω = inf{ j ∈ [μ, ∞) ∩ ℤ : q(j) = 0 },
//! ```
//!
//! (`sup ∅ = -∞`, `inf ∅ = ∞`), `S = {α, ..., ω}`, and the pair is admissible
//! iff `q > 0` on `S° = S \ {ω}` and `q̲ > 0` on `S∘ = S \ {α}`. The pmf then
//! follows from the ratio recurrence `p(k) = q(k-1)/q̲(k) · p(k-1)`.
//!
//! Up to an integer shift and/or reflection there are six types of members;
//! see [`DistributionKind`].

use serde::{Deserialize, Serialize};

use crate::quad::{Quadratic, Roots};
use crate::sum::KahanSum;
use crate::{Error, Result};

/// Integer roots are recognized within this relative distance of an integer.
/// Table 1's α/ω are defined by integer zeros; floating coefficients need a
/// snap rule (a caveat for adversarial inputs).
pub const ROOT_SNAP_TOL: f64 = 1e-9;

/// Default per-tail clipped-mass target.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Below this ratio the geometric tail majorant is used.
const GEOMETRIC_RATIO_THRESHOLD: f64 = 0.999;

/// Hard cap on window entries per side.
const SIDE_CAP: usize = 1_500_000;

/// Support endpoints; `None` encodes -∞ for `alpha` and +∞ for `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Support {
    pub alpha: Option<i64>,
    pub omega: Option<i64>,
}

impl Support {
    /// `M(X) = |S| - 1`, the maximal usable polynomial degree.
    pub fn max_order(&self) -> Option<u64> {
        match (self.alpha, self.omega) {
            (Some(a), Some(w)) => Some((w - a) as u64),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.max_order().is_some()
    }
}

/// An integer window `[lo, hi]` with truncation flags. A non-truncated
/// endpoint equals the exact support endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerWindow {
    pub lo: i64,
    pub hi: i64,
    pub lo_truncated: bool,
    pub hi_truncated: bool,
}

impl IntegerWindow {
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: i64) -> bool {
        self.lo <= j && j <= self.hi
    }

    pub fn index_of(&self, j: i64) -> Option<usize> {
        if self.contains(j) {
            Some((j - self.lo) as usize)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// Probabilities on an integer window with tail-mass bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabulatedPmf {
    pub window: IntegerWindow,
    probs: Vec<f64>,
    /// The normalizing constant C of the construction: the probability at
    /// the construction anchor (α, ω, or 0 for two-sided supports).
    pub norm_constant: f64,
    /// Upper estimate of the clipped mass below the window.
    pub tail_mass_lo: f64,
    /// Upper estimate of the clipped mass above the window.
    pub tail_mass_hi: f64,
    pub tail_tol: f64,
}

impl TabulatedPmf {
    /// Probability at `j`; zero outside the window.
    pub fn prob(&self, j: i64) -> f64 {
        match self.window.index_of(j) {
            Some(i) => self.probs[i],
            None => 0.0,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Iterates `(j, p(j))` over the window.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.window.iter().zip(self.probs.iter().copied())
    }
}

/// Where a failed admissibility check failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub support: Support,
    pub failure_reason: Option<String>,
}

/// How a model relates to its canonical Table-2 representative `Y`:
/// `X = Y`, `X = Y + shift`, or `X = shift - Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Orientation {
    Identity,
    Shifted { shift: i64 },
    Reflected { shift: i64 },
}

/// A pair of quadratic roots: either a conjugate pair `re ± i·im` or two
/// reals (which admissibility confines to the same open unit interval or to
/// the positive axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RootPair {
    Conjugate { re: f64, im: f64 },
    Real { a: f64, b: f64 },
}

impl RootPair {
    /// Builds the pair with the given sum and product of its elements.
    pub fn from_sum_product(sum: f64, product: f64) -> Self {
        let half = sum / 2.0;
        let disc = half * half - product;
        if disc < 0.0 {
            RootPair::Conjugate { re: half, im: (-disc).sqrt() }
        } else {
            let sq = disc.sqrt();
            RootPair::Real { a: half - sq, b: half + sq }
        }
    }

    pub fn sum(&self) -> f64 {
        match *self {
            RootPair::Conjugate { re, .. } => 2.0 * re,
            RootPair::Real { a, b } => a + b,
        }
    }

    pub fn product(&self) -> f64 {
        match *self {
            RootPair::Conjugate { re, im } => re * re + im * im,
            RootPair::Real { a, b } => a * b,
        }
    }
}

/// The six canonical types of the family (plus the degenerate point mass),
/// with canonical parameters and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistributionKind {
    PointMass { value: i64 },
    Poisson { lambda: f64, orientation: Orientation },
    Binomial { n: u64, p: f64, orientation: Orientation },
    NegativeBinomial { r: f64, p: f64, orientation: Orientation },
    NegativeHypergeometric { n: u64, r: f64, s: f64, orientation: Orientation },
    Hypergeometric { n: u64, r: f64, s: f64, orientation: Orientation },
    InversePolya { rho: f64, roots: RootPair, orientation: Orientation },
    DiscreteStudent { z: RootPair, w: RootPair },
}

impl DistributionKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DistributionKind::PointMass { .. } => "point_mass",
            DistributionKind::Poisson { .. } => "poisson",
            DistributionKind::Binomial { .. } => "binomial",
            DistributionKind::NegativeBinomial { .. } => "negative_binomial",
            DistributionKind::NegativeHypergeometric { .. } => "negative_hypergeometric",
            DistributionKind::Hypergeometric { .. } => "hypergeometric",
            DistributionKind::InversePolya { .. } => "inverse_polya",
            DistributionKind::DiscreteStudent { .. } => "discrete_student",
        }
    }

    /// The pair (μ; q) this kind canonically denotes, orientation applied.
    pub fn canonical_pair(&self) -> Result<(f64, Quadratic)> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        let (base_mu, base_q, orientation) = match *self {
            DistributionKind::PointMass { value } => {
                // q̲ ≡ 0 and q(value) = 0 pin S = {value}.
                return Ok((value as f64, Quadratic::new(0.0, -1.0, value as f64)));
            }
            DistributionKind::Poisson { lambda, orientation } => {
                if !(lambda > 0.0) {
                    return bad("poisson requires lambda > 0");
                }
                (lambda, Quadratic::constant(lambda), orientation)
            }
            DistributionKind::Binomial { n, p, orientation } => {
                if n == 0 || !(p > 0.0 && p < 1.0) {
                    return bad("binomial requires n >= 1 and 0 < p < 1");
                }
                let mu = n as f64 * p;
                (mu, Quadratic::new(0.0, -p, mu), orientation)
            }
            DistributionKind::NegativeBinomial { r, p, orientation } => {
                if !(r > 0.0) || !(p > 0.0 && p < 1.0) {
                    return bad("negative binomial requires r > 0 and 0 < p < 1");
                }
                let beta = (1.0 - p) / p;
                let mu = r * beta;
                (mu, Quadratic::new(0.0, beta, mu), orientation)
            }
            DistributionKind::NegativeHypergeometric { n, r, s, orientation } => {
                if n == 0 || !(r > 0.0) || !(s > 0.0) {
                    return bad("negative hypergeometric requires n >= 1 and r, s > 0");
                }
                // q(j) = (r+j)(N-j)/(r+s)
                let t = r + s;
                let mu = n as f64 * r / t;
                (mu, Quadratic::new(-1.0 / t, (n as f64 - r) / t, mu), orientation)
            }
            DistributionKind::Hypergeometric { n, r, s, orientation } => {
                let nm1 = n as f64 - 1.0;
                if n == 0 || !(r > nm1) || !(s > nm1) {
                    return bad("hypergeometric requires n >= 1 and r, s > n - 1");
                }
                // q(j) = (r-j)(N-j)/(r+s)
                let t = r + s;
                let mu = n as f64 * r / t;
                (mu, Quadratic::new(1.0 / t, -(r + n as f64) / t, mu), orientation)
            }
            DistributionKind::InversePolya { rho, roots, orientation } => {
                let (zs, zp) = (roots.sum(), roots.product());
                if !(rho > 0.0) || !(rho > zs + 1.0) {
                    return bad("inverse polya requires rho > max(0, r + s + 1)");
                }
                // q(j) = δ(j + r)(j + s), δ = 1/(ρ - r - s - 1)
                let delta = 1.0 / (rho - zs - 1.0);
                (delta * zp, Quadratic::new(delta, delta * zs, delta * zp), orientation)
            }
            DistributionKind::DiscreteStudent { z, w } => {
                let denom = w.sum() - z.sum();
                if !(denom > 0.0) {
                    return bad("discrete student requires w1 + w2 > z1 + z2");
                }
                let delta = 1.0 / denom;
                let mu = delta * (z.product() - w.product());
                return Ok((mu, Quadratic::new(delta, delta * z.sum(), delta * z.product())));
            }
        };
        Ok(match orientation {
            Orientation::Identity => (base_mu, base_q),
            Orientation::Shifted { shift } => pair_shift(base_mu, &base_q, shift),
            Orientation::Reflected { shift } => {
                let (mw, qw) = pair_shift(base_mu, &base_q, -shift);
                pair_reflect(mw, &qw)
            }
        })
    }
}

fn pair_shift(mu: f64, q: &Quadratic, r: i64) -> (f64, Quadratic) {
    (mu + r as f64, q.shifted(r))
}

fn pair_reflect(mu: f64, q: &Quadratic) -> (f64, Quadratic) {
    (-mu, q.reflected(mu))
}

/// Highest moment order with a finite expectation. `None` means every order
/// is finite; `Some(b)` means `E|X|^θ < ∞` exactly for `θ < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBudget {
    pub max_finite_order: Option<f64>,
}

impl MomentBudget {
    pub fn allows(&self, theta: f64) -> bool {
        match self.max_finite_order {
            None => true,
            Some(b) => theta < b,
        }
    }

    pub fn require(&self, theta: f64) -> Result<()> {
        if self.allows(theta) {
            Ok(())
        } else {
            Err(Error::MomentBudgetExceeded {
                requested: theta,
                budget: self.max_finite_order.unwrap_or(f64::INFINITY),
            })
        }
    }
}

fn snap_to_integer(x: f64) -> Option<i64> {
    let n = x.round();
    if (x - n).abs() <= ROOT_SNAP_TOL * x.abs().max(1.0) && n.abs() < 4.0e15 {
        Some(n as i64)
    } else {
        None
    }
}

/// Largest integer ≤ x, treating near-integers as exact.
fn floor_snapped(x: f64) -> i64 {
    snap_to_integer(x).unwrap_or_else(|| x.floor() as i64)
}

/// Smallest integer ≥ x, treating near-integers as exact.
fn ceil_snapped(x: f64) -> i64 {
    snap_to_integer(x).unwrap_or_else(|| x.ceil() as i64)
}

/// Integer roots of `poly`, snapped within [`ROOT_SNAP_TOL`].
fn integer_roots(poly: &Quadratic) -> Vec<i64> {
    let mut out = Vec::new();
    match poly.roots() {
        Roots::None | Roots::Everywhere => {}
        Roots::One(r) => out.extend(snap_to_integer(r)),
        Roots::Two(r1, r2) => {
            out.extend(snap_to_integer(r1));
            out.extend(snap_to_integer(r2));
        }
    }
    out.dedup();
    out
}

/// Support endpoints of `CO(μ; q)` by root analysis of `q̲` and `q`
/// (no unbounded scanning).
pub fn determine_support(mu: f64, q: &Quadratic) -> Support {
    let ql = q.companion(mu);
    let mu_slack = ROOT_SNAP_TOL * mu.abs().max(1.0);

    let alpha = if ql.roots() == Roots::Everywhere {
        Some(floor_snapped(mu))
    } else {
        integer_roots(&ql)
            .into_iter()
            .filter(|&n| (n as f64) <= mu + mu_slack)
            .max()
    };
    let omega = if q.roots() == Roots::Everywhere {
        Some(ceil_snapped(mu))
    } else {
        integer_roots(q)
            .into_iter()
            .filter(|&n| (n as f64) >= mu - mu_slack)
            .min()
    };
    Support { alpha, omega }
}

/// Checks `poly(j) > 0` for every integer j in `[lo, hi]` (either bound may
/// be absent, meaning unbounded). Positivity on an infinite set is decided
/// by root location; returns a witness where `poly(j) ≤ 0` on failure.
fn positive_on_integers(
    poly: &Quadratic,
    lo: Option<i64>,
    hi: Option<i64>,
) -> std::result::Result<(), i64> {
    if let (Some(a), Some(b)) = (lo, hi) {
        if a > b {
            return Ok(());
        }
    }
    let clamp = |j: i64| -> i64 {
        let j = match lo {
            Some(a) => j.max(a),
            None => j,
        };
        match hi {
            Some(b) => j.min(b),
            None => j,
        }
    };
    let in_range = |j: i64| lo.map_or(true, |a| j >= a) && hi.map_or(true, |b| j <= b);
    let check = |candidates: &[i64]| -> std::result::Result<(), i64> {
        for &j in candidates {
            if in_range(j) && poly.eval(j as f64) <= 0.0 {
                return Err(j);
            }
        }
        Ok(())
    };

    match (poly.degree(), poly.roots()) {
        (0, _) => {
            if poly.gamma > 0.0 {
                Ok(())
            } else {
                Err(clamp(0))
            }
        }
        (_, Roots::Everywhere) => Err(clamp(0)),
        (1, Roots::One(rho)) => {
            if poly.beta > 0.0 {
                // nonpositive for j ≤ ρ
                if lo.is_none() {
                    return Err(clamp(floor_snapped(rho) - 1));
                }
                let n = floor_snapped(rho);
                check(&[n - 1, n])
            } else {
                // nonpositive for j ≥ ρ
                if hi.is_none() {
                    return Err(clamp(ceil_snapped(rho) + 1));
                }
                let n = ceil_snapped(rho);
                check(&[n, n + 1])
            }
        }
        (2, roots) => {
            if poly.delta > 0.0 {
                // nonpositive exactly on [ρ1, ρ2], if real roots exist
                match roots {
                    Roots::None => Ok(()),
                    Roots::One(r) => check(&[floor_snapped(r), ceil_snapped(r)]),
                    Roots::Two(r1, r2) => {
                        let a = ceil_snapped(r1);
                        let b = floor_snapped(r2);
                        check(&[a - 1, a, a + 1, b - 1, b, b + 1])
                    }
                    Roots::Everywhere => unreachable!(),
                }
            } else {
                // positive only strictly inside (ρ1, ρ2)
                match roots {
                    Roots::None | Roots::One(_) => Err(clamp(0)),
                    Roots::Two(r1, r2) => {
                        let low = floor_snapped(r1);
                        let high = ceil_snapped(r2);
                        if lo.is_none() {
                            return Err(low - 1);
                        }
                        if hi.is_none() {
                            return Err(high + 1);
                        }
                        check(&[low - 1, low, low + 1, high - 1, high, high + 1])
                    }
                    Roots::Everywhere => unreachable!(),
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Admissibility of the pair (μ; q): `q > 0` on S° and `q̲ > 0` on S∘.
/// Failures are reported, not thrown.
pub fn check_admissible(mu: f64, q: &Quadratic) -> AdmissibilityReport {
    let support = determine_support(mu, q);
    let ql = q.companion(mu);

    let upper_interior = support.omega.map(|w| w - 1);
    if positive_on_integers(q, support.alpha, upper_interior).is_err() {
        return AdmissibilityReport {
            admissible: false,
            support,
            failure_reason: Some("q<0 on S°".to_string()),
        };
    }
    let lower_interior = support.alpha.map(|a| a + 1);
    if positive_on_integers(&ql, lower_interior, support.omega).is_err() {
        return AdmissibilityReport {
            admissible: false,
            support,
            failure_reason: Some("q̲<0 on S∘".to_string()),
        };
    }
    AdmissibilityReport { admissible: true, support, failure_reason: None }
}

/// Classifies an admissible pair into its Table-2 type with recovered
/// canonical parameters and orientation.
pub fn classify(mu: f64, q: &Quadratic, support: &Support) -> Result<DistributionKind> {
    // Point mass and two-point supports come before the general analysis:
    // every |S| = 2 member is a (shifted) Bernoulli regardless of q.
    if let (Some(a), Some(w)) = (support.alpha, support.omega) {
        if a == w {
            return Ok(DistributionKind::PointMass { value: a });
        }
        if w - a == 1 {
            return Ok(DistributionKind::Binomial {
                n: 1,
                p: mu - a as f64,
                orientation: shift_orientation(a),
            });
        }
    }

    if q.delta == 0.0 {
        classify_linear(mu, q, support)
    } else if q.delta < 0.0 {
        classify_negative_delta(mu, q, support)
    } else {
        classify_positive_delta(mu, q, support)
    }
}

fn shift_orientation(a: i64) -> Orientation {
    if a == 0 {
        Orientation::Identity
    } else {
        Orientation::Shifted { shift: a }
    }
}

fn internal(msg: &str) -> Error {
    Error::Internal(format!("classification fell through: {msg}"))
}

fn classify_linear(mu: f64, q: &Quadratic, support: &Support) -> Result<DistributionKind> {
    let beta = q.beta;
    if beta == 0.0 {
        // constant q: Poisson shifted to start at α
        let a = support.alpha.ok_or_else(|| internal("constant q with no lower endpoint"))?;
        return Ok(DistributionKind::Poisson {
            lambda: q.gamma,
            orientation: shift_orientation(a),
        });
    }
    if beta == -1.0 {
        // the negative of the constant case
        let w = support.omega.ok_or_else(|| internal("beta=-1 with no upper endpoint"))?;
        return Ok(DistributionKind::Poisson {
            lambda: q.gamma - mu,
            orientation: Orientation::Reflected { shift: w },
        });
    }
    if beta > 0.0 {
        let a = support.alpha.ok_or_else(|| internal("beta>0 with no lower endpoint"))?;
        let mu0 = mu - a as f64;
        return Ok(DistributionKind::NegativeBinomial {
            r: mu0 / beta,
            p: 1.0 / (1.0 + beta),
            orientation: shift_orientation(a),
        });
    }
    if beta > -1.0 {
        // -1 < β < 0: Binomial on {α..ω}
        let (a, w) = finite_endpoints(support)?;
        return Ok(DistributionKind::Binomial {
            n: (w - a) as u64,
            p: -beta,
            orientation: shift_orientation(a),
        });
    }
    // β < -1: the negative of the Negative Binomial case
    let w = support.omega.ok_or_else(|| internal("beta<-1 with no upper endpoint"))?;
    let beta_w = -beta - 1.0;
    let mu0 = w as f64 - mu;
    Ok(DistributionKind::NegativeBinomial {
        r: mu0 / beta_w,
        p: 1.0 / (1.0 + beta_w),
        orientation: Orientation::Reflected { shift: w },
    })
}

fn classify_negative_delta(mu: f64, _q: &Quadratic, support: &Support) -> Result<DistributionKind> {
    let (a, w) = finite_endpoints(support)?;
    let n = (w - a) as u64;
    let mu0 = mu - a as f64;
    let t = -1.0 / _q.delta; // r + s
    let r = mu0 * t / n as f64;
    Ok(DistributionKind::NegativeHypergeometric {
        n,
        r,
        s: t - r,
        orientation: shift_orientation(a),
    })
}

fn classify_positive_delta(mu: f64, q: &Quadratic, support: &Support) -> Result<DistributionKind> {
    match (support.alpha, support.omega) {
        (Some(a), Some(w)) => {
            let n = (w - a) as u64;
            let mu0 = mu - a as f64;
            let t = 1.0 / q.delta; // r + s
            let r = mu0 * t / n as f64;
            Ok(DistributionKind::Hypergeometric { n, r, s: t - r, orientation: shift_orientation(a) })
        }
        (Some(a), None) => {
            let (rho, roots) = inverse_polya_params(mu, q, a);
            Ok(DistributionKind::InversePolya { rho, roots, orientation: shift_orientation(a) })
        }
        (None, Some(w)) => {
            // the negative of the one-side infinite case
            let (mw, qw) = pair_reflect(mu, q);
            let (rho, roots) = inverse_polya_params(mw, &qw, -w);
            Ok(DistributionKind::InversePolya {
                rho,
                roots,
                orientation: Orientation::Reflected { shift: w },
            })
        }
        (None, None) => {
            let ql = q.companion(mu);
            let z = RootPair::from_sum_product(q.beta / q.delta, q.gamma / q.delta);
            let w = RootPair::from_sum_product(ql.beta / ql.delta, ql.gamma / ql.delta);
            Ok(DistributionKind::DiscreteStudent { z, w })
        }
    }
}

/// Canonical (ρ, root pair) of the one-side infinite δ > 0 member, after
/// shifting the support to start at 0.
fn inverse_polya_params(mu: f64, q: &Quadratic, alpha: i64) -> (f64, RootPair) {
    let (_, q0) = pair_shift(mu, q, -alpha);
    let rho = (q0.beta + q0.delta + 1.0) / q0.delta;
    let roots = RootPair::from_sum_product(q0.beta / q0.delta, q0.gamma / q0.delta);
    (rho, roots)
}

fn finite_endpoints(support: &Support) -> Result<(i64, i64)> {
    match (support.alpha, support.omega) {
        (Some(a), Some(w)) => Ok((a, w)),
        _ => Err(internal("expected a finite support")),
    }
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// One growing side of a pmf table: log-probabilities relative to the
/// anchor, plus the linear products while they stay inside
/// `[1e-300, 1e300]` (the accurate fast path; log-space is the fallback).
struct GrownSide {
    lps: Vec<f64>,
    us: Vec<Option<f64>>,
    /// log of the estimated clipped mass beyond the last entry
    /// (−∞ when the side is complete).
    ltail: f64,
    truncated: bool,
}

fn grow_side(
    mu: f64,
    q: &Quadratic,
    tail_tol: f64,
    anchor: i64,
    upward: bool,
    end: Option<i64>,
) -> GrownSide {
    let ql = q.companion(mu);
    // ratio of the step from |j| to |j|+1 entries along the growth direction
    let step_ratio = |j: i64| -> f64 {
        if upward {
            // p(j+1)/p(j) = q(j) / q̲(j+1)
            q.eval(j as f64) / ql.eval((j + 1) as f64)
        } else {
            // p(j-1)/p(j) = q̲(j) / q(j-1)
            ql.eval(j as f64) / q.eval((j - 1) as f64)
        }
    };

    let mut lps = vec![0.0f64];
    let mut us: Vec<Option<f64>> = vec![Some(1.0)];
    let mut lp = KahanSum::new();
    let mut linear = Some(1.0f64);
    let mut running_lse = 0.0f64; // log Σ exp(lp), seeded with the anchor
    let mut j = anchor;
    let mut ltail = f64::NEG_INFINITY;
    let mut truncated = false;

    loop {
        if Some(j) == end {
            break;
        }
        let r = step_ratio(j);
        debug_assert!(r > 0.0, "pmf ratio must be positive on the interior");
        lp.add(r.ln());
        linear = linear.and_then(|u| {
            let un = u * r;
            if (1e-300..=1e300).contains(&un) {
                Some(un)
            } else {
                None
            }
        });
        let lp_j = match linear {
            Some(u) => u.ln(),
            None => lp.value(),
        };
        lps.push(lp_j);
        us.push(linear);
        j += if upward { 1 } else { -1 };
        running_lse = logaddexp(running_lse, lp_j);

        if end.is_none() {
            let past_mode = if upward { j as f64 > mu } else { (j as f64) < mu };
            if past_mode {
                let r_next = step_ratio(j);
                let lt = if r_next < GEOMETRIC_RATIO_THRESHOLD {
                    lp_j + (r_next / (1.0 - r_next)).ln()
                } else if q.delta > 0.0 && j.unsigned_abs() >= 1 {
                    // power-law regime p ~ |j|^-(2+1/δ)
                    lp_j + (j.unsigned_abs() as f64 / (1.0 + 1.0 / q.delta)).ln()
                } else {
                    f64::INFINITY
                };
                if lt.is_finite() && lt - logaddexp(running_lse, lt) < tail_tol.ln() {
                    ltail = lt;
                    truncated = true;
                    break;
                }
            }
            if lps.len() >= SIDE_CAP {
                // record the latest estimate honestly and stop
                let r_next = step_ratio(j);
                ltail = if r_next < 1.0 {
                    lps[lps.len() - 1] + (r_next / (1.0 - r_next)).ln()
                } else {
                    lps[lps.len() - 1]
                };
                truncated = true;
                break;
            }
        }
    }
    GrownSide { lps, us, ltail, truncated }
}

/// Builds the pmf table of an admissible pair by the ratio recurrence,
/// truncating infinite tails below `tail_tol` estimated clipped mass and
/// normalizing the window to `1 - (clipped tails estimate)`.
pub fn build_pmf(mu: f64, q: &Quadratic, tail_tol: f64) -> Result<TabulatedPmf> {
    if !(tail_tol > 0.0) {
        return Err(Error::InvalidInput("tail_tol must be positive".into()));
    }
    let report = check_admissible(mu, q);
    if !report.admissible {
        return Err(Error::NotAdmissible {
            reason: report.failure_reason.unwrap_or_default(),
        });
    }
    let support = report.support;

    // anchor and growth directions per the three construction cases
    let (anchor, up, down) = match (support.alpha, support.omega) {
        (Some(a), w) => {
            let up = grow_side(mu, q, tail_tol, a, true, w);
            (a, up, None)
        }
        (None, Some(w)) => {
            let down = grow_side(mu, q, tail_tol, w, false, None);
            (w, GrownSide { lps: vec![0.0], us: vec![Some(1.0)], ltail: f64::NEG_INFINITY, truncated: false }, Some(down))
        }
        (None, None) => {
            let up = grow_side(mu, q, tail_tol, 0, true, None);
            let down = grow_side(mu, q, tail_tol, 0, false, None);
            (0, up, Some(down))
        }
    };

    // merge: indices anchor-(len_down-1) .. anchor+(len_up-1)
    let down_len = down.as_ref().map_or(1, |d| d.lps.len());
    let lo = anchor - (down_len as i64 - 1);
    let hi = anchor + (up.lps.len() as i64 - 1);
    let mut lps: Vec<f64> = Vec::with_capacity((hi - lo + 1) as usize);
    let mut us: Vec<Option<f64>> = Vec::with_capacity(lps.capacity());
    if let Some(d) = &down {
        for i in (1..d.lps.len()).rev() {
            lps.push(d.lps[i]);
            us.push(d.us[i]);
        }
    }
    lps.extend_from_slice(&up.lps);
    us.extend_from_slice(&up.us);

    let (ltail_lo, lo_truncated) = match &down {
        Some(d) => (d.ltail, d.truncated),
        None => (f64::NEG_INFINITY, false),
    };
    let (ltail_hi, hi_truncated) = (up.ltail, up.truncated);

    let all_linear = us.iter().all(|u| u.is_some());
    let (probs, tail_lo, tail_hi) = if all_linear {
        let values: Vec<f64> = us.iter().map(|u| u.unwrap()).collect();
        let sum: f64 = values.iter().copied().collect::<KahanSum>().value();
        let t_lo = ltail_lo.exp();
        let t_hi = ltail_hi.exp();
        let total = sum + t_lo + t_hi;
        (
            values.iter().map(|u| u / total).collect::<Vec<_>>(),
            t_lo / total,
            t_hi / total,
        )
    } else {
        let m = lps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = lps.iter().map(|lp| (lp - m).exp()).collect();
        let sum: f64 = scaled.iter().copied().collect::<KahanSum>().value();
        let t_lo = (ltail_lo - m).exp();
        let t_hi = (ltail_hi - m).exp();
        let total = sum + t_lo + t_hi;
        (
            scaled.iter().map(|u| u / total).collect::<Vec<_>>(),
            t_lo / total,
            t_hi / total,
        )
    };

    let window = IntegerWindow { lo, hi, lo_truncated, hi_truncated };
    let norm_constant = probs[(anchor - lo) as usize];
    Ok(TabulatedPmf {
        window,
        probs,
        norm_constant,
        tail_mass_lo: tail_lo,
        tail_mass_hi: tail_hi,
        tail_tol,
    })
}

/// A validated member of the family: the pair (μ; q) with its support,
/// classification, truncated pmf table and moment budget.
///
/// Immutable after construction; construction is single-threaded and any
/// number of threads may read concurrently.
#[derive(Debug, Clone)]
pub struct OrdModel {
    mu: f64,
    q: Quadratic,
    support: Support,
    kind: DistributionKind,
    pmf: TabulatedPmf,
    budget: MomentBudget,
    in_class_c: bool,
}

impl OrdModel {
    /// Validates and tabulates `CO(μ; q)` with the default tail tolerance.
    pub fn new(mu: f64, q: Quadratic) -> Result<Self> {
        Self::with_tail_tol(mu, q, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(mu: f64, q: Quadratic, tail_tol: f64) -> Result<Self> {
        let report = check_admissible(mu, &q);
        if !report.admissible {
            return Err(Error::NotAdmissible {
                reason: report.failure_reason.unwrap_or_default(),
            });
        }
        let support = report.support;
        let kind = classify(mu, &q, &support)?;
        let pmf = build_pmf(mu, &q, tail_tol)?;
        let budget = MomentBudget {
            max_finite_order: if q.delta > 0.0 && !support.is_finite() {
                Some(1.0 + 1.0 / q.delta)
            } else {
                None
            },
        };
        let in_class_c = q.delta <= 0.0 || support.is_finite();

        // endpoint identities: q(ω) = 0 and q(α) = μ - α
        if let Some(w) = support.omega {
            debug_assert!(q.eval(w as f64).abs() <= 1e-9 * (w as f64).abs().max(1.0));
        }
        if let Some(a) = support.alpha {
            debug_assert!(
                (q.eval(a as f64) - (mu - a as f64)).abs() <= 1e-9 * mu.abs().max(1.0)
            );
        }
        // finite support with δ > 0 forces δ < 1/(2(|S|-2))
        if let (true, Some(m)) = (q.delta > 0.0, support.max_order()) {
            if m >= 2 {
                debug_assert!(q.delta < 1.0 / (2.0 * (m - 1) as f64));
            }
        }

        Ok(OrdModel { mu, q, support, kind, pmf, budget, in_class_c })
    }

    /// Builds the canonical model of a named Table-2 type.
    pub fn from_kind(kind: DistributionKind, tail_tol: f64) -> Result<Self> {
        let (mu, q) = kind.canonical_pair()?;
        Self::with_tail_tol(mu, q, tail_tol)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn quadratic(&self) -> &Quadratic {
        &self.q
    }

    /// The companion quadratic `q̲(j) = q(j) + j - μ`.
    pub fn companion(&self) -> Quadratic {
        self.q.companion(self.mu)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn pmf(&self) -> &TabulatedPmf {
        &self.pmf
    }

    pub fn window(&self) -> &IntegerWindow {
        &self.pmf.window
    }

    /// `M(X) = |S| - 1`; `None` when the support is infinite.
    pub fn max_order(&self) -> Option<u64> {
        self.support.max_order()
    }

    pub fn budget(&self) -> &MomentBudget {
        &self.budget
    }

    /// δ ≤ 0 or finite support: polynomials are dense in L² and the
    /// Parseval machinery applies.
    pub fn in_class_c(&self) -> bool {
        self.in_class_c
    }

    /// Requires `k ≤ M(X)`.
    pub fn require_degree(&self, k: usize) -> Result<()> {
        match self.max_order() {
            Some(m) if (k as u64) > m => Err(Error::DegreeExceedsSupport { k, max: m }),
            _ => Ok(()),
        }
    }

    /// The model of `Y = X + r` (Lemma: `Y ~ CO(μ+r; q(j-r))`), pmf table
    /// relocated.
    pub fn shift(&self, r: i64) -> Result<OrdModel> {
        let (mu, q) = pair_shift(self.mu, &self.q, r);
        let support = Support {
            alpha: self.support.alpha.map(|a| a + r),
            omega: self.support.omega.map(|w| w + r),
        };
        let kind = classify(mu, &q, &support)?;
        let window = IntegerWindow {
            lo: self.pmf.window.lo + r,
            hi: self.pmf.window.hi + r,
            ..self.pmf.window
        };
        let pmf = TabulatedPmf { window, ..self.pmf.clone() };
        let pmf = TabulatedPmf { norm_constant: anchored_constant(&pmf, &support), ..pmf };
        Ok(OrdModel { mu, q, support, kind, pmf, budget: self.budget, in_class_c: self.in_class_c })
    }

    /// The model of `W = -X` (Lemma: `W ~ CO(-μ; q(-j) - j - μ)`), pmf table
    /// reversed.
    pub fn reflect(&self) -> Result<OrdModel> {
        let (mu, q) = pair_reflect(self.mu, &self.q);
        let support = Support {
            alpha: self.support.omega.map(|w| -w),
            omega: self.support.alpha.map(|a| -a),
        };
        let kind = classify(mu, &q, &support)?;
        let window = IntegerWindow {
            lo: -self.pmf.window.hi,
            hi: -self.pmf.window.lo,
            lo_truncated: self.pmf.window.hi_truncated,
            hi_truncated: self.pmf.window.lo_truncated,
        };
        let mut probs = self.pmf.probs.clone();
        probs.reverse();
        let pmf = TabulatedPmf {
            window,
            probs,
            norm_constant: 0.0,
            tail_mass_lo: self.pmf.tail_mass_hi,
            tail_mass_hi: self.pmf.tail_mass_lo,
            tail_tol: self.pmf.tail_tol,
        };
        let pmf = TabulatedPmf { norm_constant: anchored_constant(&pmf, &support), ..pmf };
        Ok(OrdModel { mu, q, support, kind, pmf, budget: self.budget, in_class_c: self.in_class_c })
    }

    /// The derived distribution `X_i` with pmf `∝ q^{[i]} p`:
    /// `X_i ~ CO(μ_i; q_i)` with `μ_i = (δi² + βi + μ)/(1-2iδ)` and
    /// `q_i(j) = q(j+i)/(1-2iδ)`, supported on `{α, ..., ω-i}`.
    pub fn derive(&self, i: usize) -> Result<OrdModel> {
        if i == 0 {
            return Ok(self.clone());
        }
        self.require_degree(i)?;
        self.budget.require(2.0 * i as f64 + 1.0)?;
        let fi = i as f64;
        let denom = 1.0 - 2.0 * fi * self.q.delta;
        if denom <= 0.0 {
            return Err(Error::DegenerateRecurrence { order: i });
        }
        let mu_i = (self.q.delta * fi * fi + self.q.beta * fi + self.mu) / denom;
        let shifted = self.q.shifted(-(i as i64));
        let q_i = Quadratic::new(shifted.delta / denom, shifted.beta / denom, shifted.gamma / denom);
        OrdModel::with_tail_tol(mu_i, q_i, self.pmf.tail_tol)
    }

    /// Maximum residual of the defining cumulative equation
    /// `Σ_{k≤j}(μ-k)p(k) = q(j)p(j)` over the window, each point scaled by
    /// `max(1, |q(j)p(j)|)`. The cumulative sum seeds a truncated lower tail
    /// with its exact boundary value `q̲(lo)p(lo)`.
    pub fn co_residual(&self) -> f64 {
        let ql = self.companion();
        let mut cum = KahanSum::new();
        if self.pmf.window.lo_truncated {
            let lo = self.pmf.window.lo;
            cum.add(ql.eval(lo as f64) * self.pmf.prob(lo));
        }
        let mut worst = 0.0f64;
        for (j, p) in self.pmf.iter() {
            cum.add((self.mu - j as f64) * p);
            let rhs = self.q.eval(j as f64) * p;
            let resid = (cum.value() - rhs).abs() / rhs.abs().max(1.0);
            worst = worst.max(resid);
        }
        worst
    }
}

/// The construction-anchor probability: p(α), p(ω), or p(0).
fn anchored_constant(pmf: &TabulatedPmf, support: &Support) -> f64 {
    let anchor = match (support.alpha, support.omega) {
        (Some(a), _) => a,
        (None, Some(w)) => w,
        (None, None) => 0,
    };
    pmf.prob(anchor)
}
