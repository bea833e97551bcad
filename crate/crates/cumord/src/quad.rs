//! Quadratics, factorial powers and forward differences.
//!
//! The building blocks every other module rests on: the quadratic
//! `q(j) = δj² + βj + γ` defining a family member, the ascending power
//! `q^{[k]}(j) = q(j)q(j+1)···q(j+k-1)`, ascending/descending factorials,
//! and k-th forward difference tables.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The quadratic `q(j) = δj² + βj + γ`.
///
/// All values are immutable after construction and every operation is pure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    /// Coefficient of `j²`.
    pub delta: f64,
    /// Coefficient of `j`.
    pub beta: f64,
    /// Constant term.
    pub gamma: f64,
}

/// Real roots of a degree ≤ 2 polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Roots {
    /// No real roots.
    None,
    /// The polynomial vanishes identically.
    Everywhere,
    One(f64),
    /// Two roots in increasing order.
    Two(f64, f64),
}

impl Quadratic {
    pub fn new(delta: f64, beta: f64, gamma: f64) -> Self {
        Self { delta, beta, gamma }
    }

    /// Constant quadratic `q ≡ γ`.
    pub fn constant(gamma: f64) -> Self {
        Self::new(0.0, 0.0, gamma)
    }

    /// Evaluates `δj² + βj + γ`.
    pub fn eval(&self, j: f64) -> f64 {
        (self.delta * j + self.beta) * j + self.gamma
    }

    /// Polynomial degree in {0, 1, 2}.
    ///
    /// Coefficients are user inputs, never computed, so the comparison
    /// against zero is exact.
    pub fn degree(&self) -> usize {
        if self.delta != 0.0 {
            2
        } else if self.beta != 0.0 {
            1
        } else {
            0
        }
    }

    /// The companion quadratic `q̲(j) = q(j) + j - μ` governing the lower
    /// support endpoint and the pmf ratio recurrence.
    pub fn companion(&self, mu: f64) -> Quadratic {
        Quadratic::new(self.delta, self.beta + 1.0, self.gamma - mu)
    }

    /// Ascending power `q^{[k]}(j) = ∏_{i=0}^{k-1} q(j+i)`; `k = 0` gives 1.
    pub fn ascending_power(&self, k: usize, j: f64) -> f64 {
        let mut prod = 1.0;
        for i in 0..k {
            prod *= self.eval(j + i as f64);
        }
        prod
    }

    /// The quadratic of the shifted variable: `Y = X + r` has
    /// `q_Y(j) = q(j - r)`.
    pub fn shifted(&self, r: i64) -> Quadratic {
        let r = r as f64;
        Quadratic::new(
            self.delta,
            self.beta - 2.0 * self.delta * r,
            (self.delta * r - self.beta) * r + self.gamma,
        )
    }

    /// The quadratic of the reflected variable: `W = -X` has
    /// `q_W(j) = q(-j) - j - μ`.
    pub fn reflected(&self, mu: f64) -> Quadratic {
        Quadratic::new(self.delta, -self.beta - 1.0, self.gamma - mu)
    }

    /// Real roots, in increasing order.
    pub fn roots(&self) -> Roots {
        if self.delta == 0.0 {
            if self.beta == 0.0 {
                return if self.gamma == 0.0 { Roots::Everywhere } else { Roots::None };
            }
            return Roots::One(-self.gamma / self.beta);
        }
        let disc = self.beta * self.beta - 4.0 * self.delta * self.gamma;
        if disc < 0.0 {
            return Roots::None;
        }
        if disc == 0.0 {
            return Roots::One(-self.beta / (2.0 * self.delta));
        }
        // Citardauq for the small-magnitude root avoids cancellation.
        let sq = disc.sqrt();
        let qq = -0.5 * (self.beta + self.beta.signum() * sq);
        let (r1, r2) = if self.beta == 0.0 {
            let r = sq / (2.0 * self.delta);
            (-r, r)
        } else {
            (qq / self.delta, self.gamma / qq)
        };
        if r1 <= r2 {
            Roots::Two(r1, r2)
        } else {
            Roots::Two(r2, r1)
        }
    }
}

/// Direction of a factorial power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorialMode {
    /// `[x]_k = x(x+1)···(x+k-1)`
    Ascending,
    /// `(x)_k = x(x-1)···(x-k+1)`
    Descending,
}

/// k-th ascending or descending factorial of `x`; `k = 0` gives 1.
pub fn factorial_power(x: f64, k: usize, mode: FactorialMode) -> f64 {
    let step = match mode {
        FactorialMode::Ascending => 1.0,
        FactorialMode::Descending => -1.0,
    };
    let mut prod = 1.0;
    for i in 0..k {
        prod *= x + step * i as f64;
    }
    prod
}

/// `[x]_k`, the ascending factorial.
pub fn ascending_factorial(x: f64, k: usize) -> f64 {
    factorial_power(x, k, FactorialMode::Ascending)
}

/// `(x)_k`, the descending factorial.
pub fn descending_factorial(x: f64, k: usize) -> f64 {
    factorial_power(x, k, FactorialMode::Descending)
}

/// `n!` as a float; exact for n ≤ 170.
pub fn factorial(n: usize) -> f64 {
    ascending_factorial(1.0, n)
}

/// Binomial coefficient C(n, k) as a float.
pub fn binomial_coefficient(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut prod = 1.0;
    for i in 0..k {
        prod = prod * (n - i) as f64 / (i + 1) as f64;
    }
    prod
}

/// k-th forward difference of a table indexed by consecutive integers.
///
/// The output is `k` entries shorter; `Δ⁰` is the identity.
pub fn forward_difference(values: &[f64], k: usize) -> Result<Vec<f64>> {
    if values.len() < k + 1 {
        return Err(Error::WindowTooSmall { needed: k + 1, have: values.len() });
    }
    let mut out = values.to_vec();
    for _ in 0..k {
        for i in 0..out.len() - 1 {
            out[i] = out[i + 1] - out[i];
        }
        out.pop();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_constant() {
        let q = Quadratic::new(0.0, 0.0, 2.0);
        assert_eq!(q.eval(7.0), 2.0);
    }

    #[test]
    fn eval_inverse_polya_example() {
        // q(j) = j² + 1 at j = 3
        let q = Quadratic::new(1.0, 0.0, 1.0);
        assert_eq!(q.eval(3.0), 10.0);
    }

    #[test]
    fn eval_binomial_quadratic() {
        let q = Quadratic::new(0.0, -0.5, 2.0);
        assert_eq!(q.eval(2.0), 1.0);
    }

    #[test]
    fn ascending_power_empty_product() {
        let q = Quadratic::new(1.0, -3.0, 0.25);
        assert_eq!(q.ascending_power(0, 5.0), 1.0);
    }

    #[test]
    fn ascending_power_constant() {
        let q = Quadratic::constant(2.0);
        assert_eq!(q.ascending_power(3, -11.0), 8.0);
    }

    #[test]
    fn ascending_power_binomial() {
        // q(j) = 0.5(4-j): q(0)q(1) = 2 * 1.5 = 3
        let q = Quadratic::new(0.0, -0.5, 2.0);
        assert_eq!(q.ascending_power(2, 0.0), 3.0);
    }

    #[test]
    fn factorial_powers() {
        assert_eq!(factorial_power(3.0, 0, FactorialMode::Ascending), 1.0);
        assert_eq!(factorial_power(3.0, 3, FactorialMode::Descending), 6.0);
        assert_eq!(factorial_power(0.5, 2, FactorialMode::Ascending), 0.75);
    }

    #[test]
    fn descending_is_reflected_ascending() {
        for k in 1..6 {
            for &x in &[-2.5, -1.0, 0.5, 3.0, 7.25] {
                let lhs = factorial_power(x, k, FactorialMode::Descending);
                let rhs = (-1.0f64).powi(k as i32)
                    * factorial_power(-x, k, FactorialMode::Ascending);
                let scale = lhs.abs().max(1.0);
                assert!((lhs - rhs).abs() <= 1e-12 * scale, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn forward_difference_of_squares() {
        let v = [0.0, 1.0, 4.0, 9.0];
        assert_eq!(forward_difference(&v, 1).unwrap(), vec![1.0, 3.0, 5.0]);
        assert_eq!(forward_difference(&v, 2).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn forward_difference_of_constant() {
        assert_eq!(forward_difference(&[5.0, 5.0, 5.0], 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_difference_window_too_small() {
        assert!(matches!(
            forward_difference(&[1.0, 2.0], 2),
            Err(Error::WindowTooSmall { needed: 3, have: 2 })
        ));
    }

    #[test]
    fn quadratic_shift_and_reflect() {
        let q = Quadratic::new(0.5, -1.0, 2.0);
        let s = q.shifted(3);
        for j in -4..6 {
            let j = j as f64;
            assert!((s.eval(j) - q.eval(j - 3.0)).abs() < 1e-12);
        }
        let w = q.reflected(1.5);
        for j in -4..6 {
            let j = j as f64;
            assert!((w.eval(j) - (q.eval(-j) - j - 1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn roots_of_quadratics() {
        assert_eq!(Quadratic::new(1.0, 0.0, 1.0).roots(), Roots::None);
        assert_eq!(Quadratic::new(0.0, 0.0, 0.0).roots(), Roots::Everywhere);
        match Quadratic::new(1.0, -3.0, 2.0).roots() {
            Roots::Two(a, b) => {
                assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        match Quadratic::new(0.0, -0.5, 2.0).roots() {
            Roots::One(r) => assert!((r - 4.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }
}
