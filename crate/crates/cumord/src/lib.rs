//! Cumulative Ord family of discrete distributions.
//!
//! A discrete random variable `X` with mean `μ` and pmf `p` belongs to the
//! cumulative Ord family, written `CO(μ; q)`, when there is a quadratic
//! `q(j) = δj² + βj + γ` with
//!
//! ```text
//! Σ_{k≤j} (μ − k) p(k) = q(j) p(j)   for all integers j.
//! ```
//!
//! Every commonly used discrete distribution (Poisson, Binomial, Negative
//! Binomial, Hypergeometric, ...) is a member. This crate provides:
//!
//! * admissibility checking and classification of a pair `(μ; q)` into one
//!   of six canonical types ([`family`]);
//! * pmf tabulation with tail-mass bookkeeping ([`family::TabulatedPmf`]);
//! * closed-form variance, norm constants `A_k` and factorial-moment
//!   recurrences ([`moments`]);
//! * Rodrigues-type orthonormal polynomials and their structural identities
//!   ([`poly`]);
//! * Fourier coefficients of test functions and Parseval machinery
//!   ([`fourier`]);
//! * the two-parameter family of variance bounds `S_{m,n}(g)` with residual
//!   series, residual caps and comparison factors ([`bounds`]);
//! * independent brute-force oracles used for self-verification ([`oracle`])
//!   and a batteries-included verification suite ([`verify`]).

pub mod bounds;
pub mod expr;
pub mod family;
pub mod fourier;
pub mod moments;
pub mod oracle;
pub mod poly;
pub mod quad;
pub mod report;
pub mod sum;
pub mod verify;

mod error;

pub use error::Error;
pub use family::{DistributionKind, OrdModel, TabulatedPmf};
pub use quad::Quadratic;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
