//! The self-verification suite: a registry of desk-scale models (one per
//! canonical type) and every structural identity checked against its
//! independent oracle route.

use std::time::{Duration, Instant};

use crate::bounds;
use crate::family::{check_admissible, DistributionKind, OrdModel, Orientation, RootPair};
use crate::fourier::{self, TestFunction};
use crate::moments;
use crate::oracle;
use crate::poly;
use crate::quad::{
    ascending_factorial, binomial_coefficient, descending_factorial, factorial, Quadratic,
};
use crate::sum::kahan_sum;
use crate::Result;

/// One registry model.
pub struct RegistryModel {
    pub name: &'static str,
    pub model: OrdModel,
    /// Full orthogonality/bounds machinery applies (class C with infinite
    /// moment budget).
    pub full_budget: bool,
}

/// One per Table-2 type at desk scale, plus the point mass. The two δ > 0
/// infinite-support members carry a finite moment budget; the bounds
/// machinery refuses them by design.
pub fn registry() -> Vec<RegistryModel> {
    let entry = |name, mu, q, full_budget| RegistryModel {
        name,
        model: OrdModel::new(mu, q).expect("registry model is admissible"),
        full_budget,
    };
    vec![
        entry("poisson(2)", 2.0, Quadratic::constant(2.0), true),
        entry("binomial(4,0.5)", 2.0, Quadratic::new(0.0, -0.5, 2.0), true),
        entry("negbinomial(1.5,0.4)", 2.25, Quadratic::new(0.0, 1.5, 2.25), true),
        entry("neghypergeometric(6,2,3)", 2.4, Quadratic::new(-0.2, 0.8, 2.4), true),
        entry(
            "hypergeometric(4,5,6)",
            20.0 / 11.0,
            Quadratic::new(1.0 / 11.0, -9.0 / 11.0, 20.0 / 11.0),
            true,
        ),
        entry("inverse_polya(2;i,-i)", 1.0, Quadratic::new(1.0, 0.0, 1.0), false),
        entry("discrete_student(0;1,0,1)", 0.0, Quadratic::new(1.0, 0.0, 1.0), false),
        entry("point_mass(1)", 1.0, Quadratic::new(0.0, -1.0, 1.0), false),
    ]
}

/// The class-C registry members with full moment budgets.
pub fn class_c_registry() -> Vec<RegistryModel> {
    registry().into_iter().filter(|e| e.full_budget).collect()
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub group: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Suite {
    filter: Option<String>,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn active(&self, group: &str) -> bool {
        self.filter.as_deref().map_or(true, |f| group.contains(f))
    }

    fn push(&mut self, group: &'static str, name: impl Into<String>, passed: bool, detail: String) {
        self.checks.push(CheckResult { group, name: name.into(), passed, detail });
    }

    /// A check that should produce a small discrepancy.
    fn tol(&mut self, group: &'static str, name: impl Into<String>, value: f64, tol: f64) {
        self.push(group, name, value.abs() <= tol, format!("{value:e} (tol {tol:e})"));
    }

    fn ok(&mut self, group: &'static str, name: impl Into<String>, cond: bool, detail: String) {
        self.push(group, name, cond, detail);
    }

    fn error(&mut self, group: &'static str, name: impl Into<String>, err: &crate::Error) {
        self.push(group, name, false, format!("error: {err}"));
    }
}

/// Runs the suite, optionally filtered by group-name substring and extended
/// with a user-supplied model.
pub fn run_suite(filter: Option<&str>, extra_model: Option<&OrdModel>) -> SuiteReport {
    let start = Instant::now();
    let mut suite = Suite { filter: filter.map(String::from), checks: Vec::new() };

    if suite.active("admissibility") {
        check_admissibility(&mut suite);
    }
    if suite.active("classification") {
        check_classification(&mut suite);
    }
    if suite.active("pmf") {
        check_pmf(&mut suite);
    }
    if suite.active("transforms") {
        check_transforms(&mut suite);
    }
    if suite.active("moments") {
        check_moments(&mut suite);
    }
    if suite.active("orthogonality") {
        check_orthogonality(&mut suite);
    }
    if suite.active("transfer") {
        check_transfer(&mut suite);
    }
    if suite.active("identities") {
        check_identities(&mut suite);
    }
    if suite.active("fourier") {
        check_fourier(&mut suite);
    }
    if suite.active("bounds") {
        check_bounds(&mut suite);
    }
    if let Some(model) = extra_model {
        check_user_model(&mut suite, model);
    }

    SuiteReport { checks: suite.checks, elapsed: start.elapsed() }
}

fn check_admissibility(suite: &mut Suite) {
    const G: &str = "admissibility";

    let rep = check_admissible(1.0, &Quadratic::new(1.0, 0.0, 1.0));
    suite.ok(
        G,
        "pair (1; j^2+1) admissible on N",
        rep.admissible && rep.support.alpha == Some(0) && rep.support.omega.is_none(),
        format!("{rep:?}"),
    );

    let rep = check_admissible(0.0, &Quadratic::new(1.0, 0.0, 1.0));
    suite.ok(
        G,
        "pair (0; j^2+1) admissible on Z",
        rep.admissible && rep.support.alpha.is_none() && rep.support.omega.is_none(),
        format!("{rep:?}"),
    );

    let rep = check_admissible(0.0, &Quadratic::constant(-1.0));
    suite.ok(
        G,
        "negative constant quadratic rejected",
        !rep.admissible && rep.failure_reason.as_deref() == Some("q<0 on S°"),
        format!("{rep:?}"),
    );

    let rep = check_admissible(1.0, &Quadratic::new(0.0, -1.0, 1.0));
    suite.ok(
        G,
        "degenerate pair is a point mass at 1",
        rep.admissible && rep.support.alpha == Some(1) && rep.support.omega == Some(1),
        format!("{rep:?}"),
    );

    // a pair failing on the companion side
    let rep = check_admissible(-0.5, &Quadratic::new(0.0, 0.0, 2.0));
    suite.ok(
        G,
        "companion failure reported",
        !rep.admissible && rep.failure_reason.as_deref() == Some("q̲<0 on S∘"),
        format!("{rep:?}"),
    );
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn check_classification(suite: &mut Suite) {
    const G: &str = "classification";

    let cases: Vec<(&str, DistributionKind)> = vec![
        ("poisson", DistributionKind::Poisson { lambda: 2.0, orientation: Orientation::Identity }),
        (
            "poisson shifted",
            DistributionKind::Poisson { lambda: 0.7, orientation: Orientation::Shifted { shift: -3 } },
        ),
        (
            "poisson reflected",
            DistributionKind::Poisson { lambda: 1.2, orientation: Orientation::Reflected { shift: 5 } },
        ),
        (
            "binomial",
            DistributionKind::Binomial { n: 4, p: 0.5, orientation: Orientation::Identity },
        ),
        (
            "binomial shifted",
            DistributionKind::Binomial { n: 7, p: 0.25, orientation: Orientation::Shifted { shift: 2 } },
        ),
        (
            "negative binomial",
            DistributionKind::NegativeBinomial { r: 1.5, p: 0.4, orientation: Orientation::Identity },
        ),
        (
            "negative binomial reflected",
            DistributionKind::NegativeBinomial {
                r: 2.5,
                p: 0.6,
                orientation: Orientation::Reflected { shift: 0 },
            },
        ),
        (
            "negative hypergeometric",
            DistributionKind::NegativeHypergeometric {
                n: 6,
                r: 2.0,
                s: 3.0,
                orientation: Orientation::Identity,
            },
        ),
        (
            "hypergeometric",
            DistributionKind::Hypergeometric { n: 4, r: 5.0, s: 6.0, orientation: Orientation::Identity },
        ),
        (
            "inverse polya (conjugate roots)",
            DistributionKind::InversePolya {
                rho: 2.0,
                roots: RootPair::Conjugate { re: 0.0, im: 1.0 },
                orientation: Orientation::Identity,
            },
        ),
        (
            "inverse polya (real roots)",
            DistributionKind::InversePolya {
                rho: 4.5,
                roots: RootPair::Real { a: 0.5, b: 1.5 },
                orientation: Orientation::Identity,
            },
        ),
        (
            "discrete student",
            DistributionKind::DiscreteStudent {
                z: RootPair::Conjugate { re: 0.0, im: 1.0 },
                w: RootPair::Conjugate { re: 0.5, im: 3.0f64.sqrt() / 2.0 },
            },
        ),
        ("point mass", DistributionKind::PointMass { value: 3 }),
    ];

    for (name, kind) in cases {
        match round_trip_kind(&kind) {
            Ok(err) => suite.tol(G, format!("round-trip: {name}"), err, 1e-9),
            Err(e) => suite.error(G, format!("round-trip: {name}"), &e),
        }
    }
}

/// Builds the canonical pair of `kind`, classifies it back, and returns the
/// worst relative parameter error.
fn round_trip_kind(kind: &DistributionKind) -> Result<f64> {
    let (mu, q) = kind.canonical_pair()?;
    let model = OrdModel::new(mu, q)?;
    let got = model.kind();
    let err = match (kind, got) {
        (
            DistributionKind::Poisson { lambda: a, orientation: oa },
            DistributionKind::Poisson { lambda: b, orientation: ob },
        ) if oa == ob => relative(*a, *b),
        (
            DistributionKind::Binomial { n: na, p: pa, orientation: oa },
            DistributionKind::Binomial { n: nb, p: pb, orientation: ob },
        ) if na == nb && oa == ob => relative(*pa, *pb),
        (
            DistributionKind::NegativeBinomial { r: ra, p: pa, orientation: oa },
            DistributionKind::NegativeBinomial { r: rb, p: pb, orientation: ob },
        ) if oa == ob => relative(*ra, *rb).max(relative(*pa, *pb)),
        (
            DistributionKind::NegativeHypergeometric { n: na, r: ra, s: sa, orientation: oa },
            DistributionKind::NegativeHypergeometric { n: nb, r: rb, s: sb, orientation: ob },
        ) if na == nb && oa == ob => relative(*ra, *rb).max(relative(*sa, *sb)),
        (
            DistributionKind::Hypergeometric { n: na, r: ra, s: sa, orientation: oa },
            DistributionKind::Hypergeometric { n: nb, r: rb, s: sb, orientation: ob },
        ) if na == nb && oa == ob => relative(*ra, *rb).max(relative(*sa, *sb)),
        (
            DistributionKind::InversePolya { rho: ra, roots: za, orientation: oa },
            DistributionKind::InversePolya { rho: rb, roots: zb, orientation: ob },
        ) if oa == ob => relative(*ra, *rb).max(root_pair_error(za, zb)),
        (
            DistributionKind::DiscreteStudent { z: za, w: wa },
            DistributionKind::DiscreteStudent { z: zb, w: wb },
        ) => root_pair_error(za, zb).max(root_pair_error(wa, wb)),
        (
            DistributionKind::PointMass { value: a },
            DistributionKind::PointMass { value: b },
        ) if a == b => 0.0,
        _ => f64::INFINITY,
    };
    Ok(err)
}

fn root_pair_error(a: &RootPair, b: &RootPair) -> f64 {
    relative(a.sum(), b.sum()).max(relative(a.product(), b.product()))
}

/// Closed-form Table-2 pmf for the types that have one (the inverse Polya
/// closed form is exercised through the CO(1;1,0,1) worked product).
fn closed_form_pmf(kind: &DistributionKind, j: i64) -> Option<f64> {
    let jf = j as f64;
    match *kind {
        DistributionKind::Poisson { lambda, orientation: Orientation::Identity } => {
            if j < 0 {
                return Some(0.0);
            }
            Some((-lambda).exp() * lambda.powi(j as i32) / factorial(j as usize))
        }
        DistributionKind::Binomial { n, p, orientation: Orientation::Identity } => {
            if j < 0 || j > n as i64 {
                return Some(0.0);
            }
            Some(
                binomial_coefficient(n as usize, j as usize)
                    * p.powi(j as i32)
                    * (1.0 - p).powi((n as i64 - j) as i32),
            )
        }
        DistributionKind::NegativeBinomial { r, p, orientation: Orientation::Identity } => {
            if j < 0 {
                return Some(0.0);
            }
            Some(
                ascending_factorial(r, j as usize) / factorial(j as usize)
                    * p.powf(r)
                    * (1.0 - p).powi(j as i32),
            )
        }
        DistributionKind::NegativeHypergeometric { n, r, s, orientation: Orientation::Identity } => {
            if j < 0 || j > n as i64 {
                return Some(0.0);
            }
            let nj = (n as i64 - j) as usize;
            Some(
                binomial_coefficient(n as usize, j as usize)
                    * descending_factorial(-r, j as usize)
                    * descending_factorial(-s, nj)
                    / descending_factorial(-r - s, n as usize),
            )
        }
        DistributionKind::Hypergeometric { n, r, s, orientation: Orientation::Identity } => {
            if j < 0 || j > n as i64 {
                return Some(0.0);
            }
            let nj = (n as i64 - j) as usize;
            Some(
                binomial_coefficient(n as usize, j as usize)
                    * descending_factorial(r, j as usize)
                    * descending_factorial(s, nj)
                    / descending_factorial(r + s, n as usize),
            )
        }
        _ => {
            let _ = jf;
            None
        }
    }
}

fn check_pmf(suite: &mut Suite) {
    const G: &str = "pmf";

    for entry in registry() {
        let model = &entry.model;
        let pmf = model.pmf();

        suite.tol(G, format!("cumulative identity: {}", entry.name), model.co_residual(), 1e-9);

        // closed-form comparison where Table 2 provides one
        if let Some(worst) = pmf
            .iter()
            .filter_map(|(j, p)| closed_form_pmf(model.kind(), j).map(|e| (p, e)))
            .map(|(p, e)| (p - e).abs() / e.abs().max(1e-30))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
        {
            suite.tol(G, format!("closed-form pmf: {}", entry.name), worst, 1e-9);
        }

        // mass accounting
        let total = kahan_sum(pmf.probs().iter().copied()) + pmf.tail_mass_lo + pmf.tail_mass_hi;
        suite.tol(
            G,
            format!("mass accounting: {}", entry.name),
            total - 1.0,
            2.0 * pmf.tail_tol,
        );

        // ratio recurrence on the interior
        let q = model.quadratic();
        let ql = model.companion();
        let mut worst = 0.0f64;
        for j in pmf.window.lo..pmf.window.hi {
            let expected = q.eval(j as f64) / ql.eval((j + 1) as f64);
            let got = pmf.prob(j + 1) / pmf.prob(j);
            worst = worst.max((got - expected).abs() / expected.abs().max(1e-300));
        }
        suite.tol(G, format!("ratio recurrence: {}", entry.name), worst, 1e-10);

        // tail limit q(j)p(j) -> 0 at truncation boundaries
        if pmf.window.lo_truncated || pmf.window.hi_truncated {
            let qp_max = pmf
                .iter()
                .map(|(j, p)| (q.eval(j as f64) * p).abs())
                .fold(0.0f64, f64::max);
            let mut edge: f64 = 0.0;
            if pmf.window.hi_truncated {
                edge = edge.max((q.eval(pmf.window.hi as f64) * pmf.prob(pmf.window.hi)).abs());
            }
            if pmf.window.lo_truncated {
                edge = edge.max((q.eval(pmf.window.lo as f64) * pmf.prob(pmf.window.lo)).abs());
            }
            suite.ok(
                G,
                format!("tail limit: {}", entry.name),
                edge < 10.0 * pmf.tail_tol * qp_max.max(1e-300),
                format!("edge {edge:e} vs {:e}", 10.0 * pmf.tail_tol * qp_max),
            );
        }

        // Ord-system form: [Δp(j-1)]q(j-1) = p₁(j)p(j), p₁(j) = μ-j-Δq(j-1)
        let mut worst_abs = 0.0f64;
        let mut scale = 1e-300f64;
        for j in pmf.window.lo + 1..=pmf.window.hi {
            let dq = q.eval(j as f64) - q.eval(j as f64 - 1.0);
            let p1 = model.mu() - j as f64 - dq;
            let lhs = (pmf.prob(j) - pmf.prob(j - 1)) * q.eval(j as f64 - 1.0);
            let rhs = p1 * pmf.prob(j);
            worst_abs = worst_abs.max((lhs - rhs).abs());
            scale = scale.max(rhs.abs());
        }
        suite.tol(G, format!("Ord difference form: {}", entry.name), worst_abs / scale, 1e-9);
    }

    // the two worked δ > 0 pairs
    let ip = OrdModel::new(1.0, Quadratic::new(1.0, 0.0, 1.0)).unwrap();
    let c_expected = std::f64::consts::PI / std::f64::consts::PI.sinh();
    suite.tol(
        G,
        "CO(1;1,0,1): C = pi/sinh(pi)",
        ip.pmf().norm_constant - c_expected,
        1e-9,
    );
    // p(j) = C ∏_{k<j}(k²+1) / (j!(j+1)!)
    let mut worst = 0.0f64;
    let mut numer = 1.0;
    for j in 0..=12i64 {
        let expect = c_expected * numer / (factorial(j as usize) * factorial(j as usize + 1));
        worst = worst.max(relative(ip.pmf().prob(j), expect));
        numer *= (j * j + 1) as f64;
    }
    suite.tol(G, "CO(1;1,0,1): worked pmf product", worst, 1e-9);

    let student = OrdModel::new(0.0, Quadratic::new(1.0, 0.0, 1.0)).unwrap();
    suite.ok(
        "pmf",
        "CO(0;1,0,1): two-sided support",
        student.support().alpha.is_none() && student.support().omega.is_none(),
        format!("{:?}", student.support()),
    );
}

fn check_transforms(suite: &mut Suite) {
    const G: &str = "transforms";

    for entry in class_c_registry() {
        let model = &entry.model;

        // shift by 3 matches a fresh construction
        match model.shift(3) {
            Ok(shifted) => {
                let fresh = OrdModel::new(model.mu() + 3.0, model.quadratic().shifted(3)).unwrap();
                let worst = shifted
                    .pmf()
                    .iter()
                    .filter(|&(j, _)| fresh.window().contains(j))
                    .map(|(j, p)| (p - fresh.pmf().prob(j)).abs())
                    .fold(0.0f64, f64::max);
                suite.tol(G, format!("shift vs fresh: {}", entry.name), worst, 1e-12);
            }
            Err(e) => suite.error(G, format!("shift vs fresh: {}", entry.name), &e),
        }

        // reflection is an involution
        match model.reflect().and_then(|w| w.reflect()) {
            Ok(back) => {
                let worst = model
                    .pmf()
                    .iter()
                    .map(|(j, p)| (p - back.pmf().prob(j)).abs())
                    .fold(0.0f64, f64::max);
                suite.tol(G, format!("reflect twice: {}", entry.name), worst, 1e-12);
            }
            Err(e) => suite.error(G, format!("reflect twice: {}", entry.name), &e),
        }

        // reflected model still satisfies the cumulative identity
        match model.reflect() {
            Ok(w) => suite.tol(G, format!("reflected identity: {}", entry.name), w.co_residual(), 1e-9),
            Err(e) => suite.error(G, format!("reflected identity: {}", entry.name), &e),
        }

        // derived distributions: fresh CO(μ_i; q_i) vs q^{[i]} p renormalized
        let top = entry.model.max_order().map_or(2, |m| m.min(2)) as usize;
        for i in 1..=top {
            match model.derive(i) {
                Ok(derived) => {
                    let a_i = moments::norm_constant_a(model, i).unwrap();
                    let worst = derived
                        .pmf()
                        .iter()
                        .map(|(j, p)| {
                            let direct = model.quadratic().ascending_power(i, j as f64)
                                * model.pmf().prob(j)
                                / a_i;
                            (p - direct).abs()
                        })
                        .fold(0.0f64, f64::max);
                    suite.tol(G, format!("derived pmf i={i}: {}", entry.name), worst, 1e-11);
                }
                Err(e) => suite.error(G, format!("derived pmf i={i}: {}", entry.name), &e),
            }
        }
    }
}

fn check_moments(suite: &mut Suite) {
    const G: &str = "moments";

    for entry in class_c_registry() {
        let model = &entry.model;

        let var = moments::variance(model).unwrap();
        let brute = oracle::brute_variance(model, |j| j as f64).unwrap().value;
        suite.tol(G, format!("variance closed form: {}", entry.name), relative(var, brute), 1e-9);

        let table = moments::descending_moments(model, 6).unwrap();
        let mut worst = 0.0f64;
        for r in 0..=6 {
            worst = worst.max(relative(
                table.descending[r],
                moments::factorial_moment_direct(model, r, false),
            ));
            worst = worst.max(relative(
                table.ascending[r],
                moments::factorial_moment_direct(model, r, true),
            ));
        }
        suite.tol(G, format!("factorial recurrences vs direct: {}", entry.name), worst, 1e-9);

        let mut worst = 0.0f64;
        for r in 0..=6 {
            let direct = oracle::brute_expectation(model, |j| (j as f64).powi(r)).unwrap().value;
            worst = worst.max(relative(table.raw[r as usize], direct));
        }
        suite.tol(G, format!("raw moments via Stirling: {}", entry.name), worst, 1e-9);

        let k_top = model.max_order().map_or(4, |m| m.min(4)) as usize;
        let mut worst = 0.0f64;
        for k in 0..=k_top {
            let closed = moments::norm_constant_a(model, k).unwrap();
            let direct = oracle::brute_expectation(model, |j| {
                model.quadratic().ascending_power(k, j as f64)
            })
            .unwrap()
            .value;
            worst = worst.max(relative(closed, direct));
        }
        suite.tol(G, format!("A_k product vs direct: {}", entry.name), worst, 1e-9);

        let i_top = model.max_order().map_or(3, |m| (m.saturating_sub(1)).min(3)) as usize;
        let mut worst = 0.0f64;
        for i in 0..=i_top {
            let closed = moments::variance_derived(model, i).unwrap();
            let fresh = moments::variance(&model.derive(i).unwrap()).unwrap();
            worst = worst.max(relative(closed, fresh));
        }
        suite.tol(G, format!("Var X_i two routes: {}", entry.name), worst, 1e-10);

        let mut worst = 0.0f64;
        for j in 0..=i_top {
            let lhs = (1.0 - 2.0 * j as f64 * model.quadratic().delta)
                * moments::variance_derived(model, j).unwrap();
            let rhs = moments::norm_constant_a(model, j + 1).unwrap()
                / moments::norm_constant_a(model, j).unwrap();
            worst = worst.max(relative(lhs, rhs));
        }
        suite.tol(G, format!("telescoping A_k identity: {}", entry.name), worst, 1e-10);
    }

    // Poisson factorial moments are λ^r
    let poisson = &class_c_registry()[0].model;
    let table = moments::descending_moments(poisson, 6).unwrap();
    let worst = (0..=6)
        .map(|r| relative(table.descending[r], 2.0f64.powi(r as i32)))
        .fold(0.0f64, f64::max);
    suite.tol(G, "poisson(2): descending moments are powers", worst, 1e-10);
}

fn check_orthogonality(suite: &mut Suite) {
    const G: &str = "orthogonality";

    for entry in class_c_registry() {
        let model = &entry.model;
        let n = model.max_order().map_or(6, |m| m.min(6)) as usize;
        let basis = match poly::orthonormal_basis(model, n) {
            Ok(b) => b,
            Err(e) => {
                suite.error(G, format!("basis: {}", entry.name), &e);
                continue;
            }
        };
        let probs = model.pmf().probs();

        let mut worst = 0.0f64;
        for a in 0..=n {
            for b in 0..=a {
                let dot = kahan_sum(
                    basis[a]
                        .standardized_values
                        .iter()
                        .zip(&basis[b].standardized_values)
                        .zip(probs)
                        .map(|((x, y), p)| x * y * p),
                );
                let expect = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).abs());
            }
        }
        suite.tol(G, format!("gram matrix: {}", entry.name), worst, 1e-8);

        // E P_k² = c_k(δ) A_k (norm in the unstandardized scale)
        let mut worst = 0.0f64;
        for poly_k in &basis {
            let norm = kahan_sum(
                poly_k.values.iter().zip(probs).map(|(v, p)| v * v * p),
            );
            let expect =
                poly_k.lead * moments::norm_constant_a(model, poly_k.degree).unwrap()
                    * factorial(poly_k.degree);
            worst = worst.max(relative(norm, expect));
        }
        suite.tol(G, format!("rodrigues norms: {}", entry.name), worst, 1e-8);

        // coefficients reproduce values; top coefficient is c_k(δ)
        let mut worst_val = 0.0f64;
        let mut worst_lead = 0.0f64;
        for poly_k in &basis {
            let scale = poly_k.values.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            for (idx, j) in model.window().iter().enumerate() {
                let horner =
                    poly_k.coeffs.iter().rev().fold(0.0, |acc, &c| acc * j as f64 + c);
                worst_val = worst_val.max((horner - poly_k.values[idx]).abs() / scale);
            }
            worst_lead = worst_lead
                .max((poly_k.coeffs[poly_k.degree] - poly_k.lead).abs() / poly_k.lead);
        }
        suite.tol(G, format!("coefficient consistency: {}", entry.name), worst_val, 1e-8);
        suite.tol(G, format!("leading coefficient: {}", entry.name), worst_lead, 1e-8);

        // Gram-Schmidt oracle agreement (values, both orthonormal with
        // positive leads)
        match oracle::gram_schmidt_basis(model, n.min(4)) {
            Ok(gs) => {
                let mut worst = 0.0f64;
                for (k, gsk) in gs.iter().enumerate() {
                    let scale = gsk.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
                    for (idx, v) in gsk.iter().enumerate() {
                        worst = worst
                            .max((basis[k].standardized_values[idx] - v).abs() / scale);
                    }
                }
                suite.tol(G, format!("gram-schmidt oracle: {}", entry.name), worst, 1e-7);
            }
            Err(e) => suite.error(G, format!("gram-schmidt oracle: {}", entry.name), &e),
        }

        // beyond M the Rodrigues sums vanish identically
        if let Some(m) = model.max_order() {
            let norm = poly::rodrigues_norm_raw(model, m as usize + 1);
            suite.tol(G, format!("degree M+1 vanishes: {}", entry.name), norm, 1e-16);
        }
    }
}

fn check_transfer(suite: &mut Suite) {
    const G: &str = "transfer";
    for entry in class_c_registry() {
        let model = &entry.model;
        let n = model.max_order().map_or(4, |m| m.min(4)) as usize;
        match poly::verify_difference_transfer(model, n) {
            Ok(report) => {
                let worst = report
                    .entries
                    .iter()
                    .map(|e| e.max_abs_discrepancy / e.threshold.max(1e-300))
                    .fold(0.0f64, f64::max);
                suite.ok(
                    G,
                    format!("difference transfer (m,k<={n}): {}", entry.name),
                    report.passed,
                    format!("worst {worst:.3e} of threshold"),
                );
            }
            Err(e) => suite.error(G, format!("difference transfer: {}", entry.name), &e),
        }
    }
}

fn check_identities(suite: &mut Suite) {
    const G: &str = "identities";
    for entry in registry() {
        let model = &entry.model;
        if !entry.full_budget && model.max_order().is_none() {
            continue; // δ>0 infinite-support members lack the moments
        }
        let k_top = model.max_order().map_or(3, |m| m.min(3)) as usize;
        for k in 1..=k_top {
            match poly::verify_extended_identity(model, k) {
                Ok(rep) => suite.tol(
                    G,
                    format!("extended equation k={k}: {}", entry.name),
                    rep.max_discrepancy,
                    1e-9,
                ),
                Err(e) => suite.error(G, format!("extended equation k={k}: {}", entry.name), &e),
            }
            match poly::verify_inversion_formula(model, k) {
                Ok(rep) => suite.tol(
                    G,
                    format!("inversion formula k={k}: {}", entry.name),
                    rep.max_discrepancy,
                    1e-9,
                ),
                Err(e) => suite.error(G, format!("inversion formula k={k}: {}", entry.name), &e),
            }
        }
    }
}

fn check_fourier(suite: &mut Suite) {
    const G: &str = "fourier";

    for entry in class_c_registry() {
        let model = &entry.model;
        let k_max = fourier::effective_k_max(model, Some(6));

        for g in TestFunction::suite(model) {
            let spec = match fourier::spectrum(model, &g, k_max) {
                Ok(s) => s,
                Err(e) => {
                    suite.error(G, format!("spectrum {} on {}", g.label(), entry.name), &e);
                    continue;
                }
            };
            // covariance identity: the two routes agree coefficientwise
            let scale = 1.0 + spec.alphas.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            suite.tol(
                G,
                format!("covariance identity {} on {}", g.label(), entry.name),
                spec.max_route_discrepancy / scale,
                1e-8,
            );
        }

        // Parseval for polynomial g of degree ≤ min(3, M)
        let degree_cap = model.max_order().map_or(3, |m| m.min(3));
        let g = match degree_cap {
            1 => TestFunction::Identity,
            2 => TestFunction::Square,
            _ => TestFunction::Cube,
        };
        let spec = fourier::spectrum(model, &g, k_max).unwrap();
        let gv: Vec<f64> = model.window().iter().map(|j| g.eval(j).unwrap()).collect();
        let lo = model.window().lo;
        let var = oracle::brute_variance(model, |j| gv[(j - lo) as usize]).unwrap().value;
        suite.tol(
            G,
            format!("parseval for {} on {}", g.label(), entry.name),
            relative(spec.partial_parseval, var),
            1e-8,
        );

        // difference-energy identity at orders 0..=2
        let mut worst = 0.0f64;
        for i in 0..=fourier::effective_k_max(model, Some(2)) {
            let e = fourier::difference_energy(model, &g, i, Some(k_max)).unwrap();
            if e.remainder_estimate < 1e-10 {
                worst = worst.max(relative(e.series, e.direct));
            }
        }
        suite.tol(G, format!("energy series on {}", entry.name), worst, 1e-8);

        // Fourier transfer to derived distributions (Theorem route)
        let mut worst = 0.0f64;
        let k_hi = fourier::effective_k_max(model, Some(4));
        let tc = poly::transfer_constants(model, k_hi).unwrap();
        let g = TestFunction::Cube;
        let spec = fourier::spectrum(model, &g, k_hi).unwrap();
        for i in 1..=k_hi {
            let derived = model.derive(i).unwrap();
            let basis = poly::orthonormal_basis(&derived, k_hi - i).unwrap();
            let gv: Vec<f64> = (model.window().lo..=model.window().hi + i as i64)
                .map(|j| g.eval(j).unwrap())
                .collect();
            let di = crate::quad::forward_difference(&gv, i).unwrap();
            for k in i..=k_hi {
                let lhs = kahan_sum(derived.pmf().iter().filter_map(|(j, p)| {
                    let offset = usize::try_from(j - model.window().lo).ok()?;
                    let phi = basis[k - i]
                        .standardized_values[derived.window().index_of(j)?];
                    Some(phi * di.get(offset).copied()? * p)
                }));
                let rhs = tc.v[i][k - i] * spec.alphas[k];
                worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
            }
        }
        suite.tol(G, format!("fourier transfer on {}", entry.name), worst, 1e-8);

        // monotone L² chain across the builtin suite
        let mut chain_ok = true;
        for g in TestFunction::suite(model) {
            let top = fourier::effective_k_max(model, Some(3));
            if fourier::difference_energy_direct(model, &g, top).is_ok() {
                for i in 0..top {
                    chain_ok &= fourier::difference_energy_direct(model, &g, i).is_ok();
                }
            }
        }
        suite.ok(G, format!("monotone L2 chain on {}", entry.name), chain_ok, String::new());
    }
}

fn check_bounds(suite: &mut Suite) {
    const G: &str = "bounds";

    // the worked Poisson example
    let poisson = &class_c_registry()[0].model;
    let g = TestFunction::Square;
    let var = oracle::brute_variance(poisson, |j| (j * j) as f64).unwrap().value;
    suite.tol(G, "poisson(2) x^2: Var = 58", var - 58.0, 1e-9);
    let lower = bounds::variance_bound(poisson, &g, 1, 0).unwrap();
    suite.tol(G, "poisson(2) x^2: S_{1,0} = 50", lower - 50.0, 1e-9);
    let upper = bounds::variance_bound(poisson, &g, 0, 1).unwrap();
    suite.tol(G, "poisson(2) x^2: S_{0,1} = 66", upper - 66.0, 1e-9);
    let s11 = bounds::variance_bound(poisson, &g, 1, 1).unwrap();
    suite.tol(G, "poisson(2) x^2: S_{1,1} = Var", s11 - 58.0, 1e-9);

    for entry in class_c_registry() {
        let model = &entry.model;
        for g in TestFunction::suite(model) {
            match bounds::bound_report(model, &g, 3, 3) {
                Ok(report) => {
                    suite.ok(
                        G,
                        format!("grid invariants {} on {}", g.label(), entry.name),
                        report.invariants_ok(),
                        format!(
                            "sandwich {} routes {} caps {} weights {}",
                            report.sandwich_ok,
                            report.residual_routes_ok,
                            report.caps_ok,
                            report.weights_positive
                        ),
                    );
                }
                Err(e) => {
                    suite.error(G, format!("grid {} on {}", g.label(), entry.name), &e)
                }
            }
        }
    }

    // monotone convergence of S_{m,n} toward Var as m grows (Poisson)
    let g = TestFunction::ExpScaled { scale: fourier::default_exp_scale(poisson) };
    let gv: Vec<f64> = poisson.window().iter().map(|j| g.eval(j).unwrap()).collect();
    let lo = poisson.window().lo;
    let var = oracle::brute_variance(poisson, |j| gv[(j - lo) as usize]).unwrap().value;
    let mut ok = true;
    for n in 1..=2usize {
        let mut prev = f64::INFINITY;
        for m in 0..=6usize {
            let s = bounds::variance_bound(poisson, &g, m, n).unwrap();
            let gap = (var - s).abs();
            ok &= gap <= prev + 1e-10;
            prev = gap;
        }
    }
    suite.ok(G, "monotone convergence in m (poisson, exp)", ok, String::new());
}

fn check_user_model(suite: &mut Suite, model: &OrdModel) {
    const G: &str = "user-model";
    suite.tol(G, "cumulative identity", model.co_residual(), 1e-9);
    let pmf = model.pmf();
    let total = kahan_sum(pmf.probs().iter().copied()) + pmf.tail_mass_lo + pmf.tail_mass_hi;
    suite.tol(G, "mass accounting", total - 1.0, 2.0 * pmf.tail_tol);
    if model.in_class_c() {
        if let Ok(var) = moments::variance(model) {
            let brute = oracle::brute_variance(model, |j| j as f64).unwrap().value;
            suite.tol(G, "variance closed form", relative(var, brute), 1e-9);
        }
        let n = model.max_order().map_or(4, |m| m.min(4)) as usize;
        if n >= 1 {
            match poly::verify_difference_transfer(model, n) {
                Ok(rep) => suite.ok(G, "difference transfer", rep.passed, String::new()),
                Err(e) => suite.error(G, "difference transfer", &e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_builds_and_has_one_model_per_type() {
        let reg = registry();
        assert_eq!(reg.len(), 8);
        let tags: Vec<&str> = reg.iter().map(|e| e.model.kind().tag()).collect();
        for expected in [
            "poisson",
            "binomial",
            "negative_binomial",
            "negative_hypergeometric",
            "hypergeometric",
            "inverse_polya",
            "discrete_student",
            "point_mass",
        ] {
            assert!(tags.contains(&expected), "missing {expected}");
        }
    }

    #[test]
    fn filtered_run_only_touches_matching_groups() {
        let report = run_suite(Some("admissibility"), None);
        assert!(report.checks.iter().all(|c| c.group == "admissibility"));
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }
}
