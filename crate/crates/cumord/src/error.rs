use thiserror::Error;

/// Errors produced by model construction and the numerical operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The pair (μ; q) does not admit a pmf in the cumulative Ord system.
    #[error("pair (mu; q) is not admissible: {reason}")]
    NotAdmissible { reason: String },

    /// A difference table was requested on fewer than k+1 values.
    #[error("window too small: need at least {needed} values, have {have}")]
    WindowTooSmall { needed: usize, have: usize },

    /// A moment of order `requested` was asked for but only orders strictly
    /// below `budget` are finite.
    #[error("moment budget exceeded: order {requested} requested, finite only below {budget}")]
    MomentBudgetExceeded { requested: f64, budget: f64 },

    /// A polynomial degree beyond M = |S| - 1 was requested.
    #[error("degree {k} exceeds the maximal usable degree M = {max}")]
    DegreeExceedsSupport { k: usize, max: u64 },

    /// A factor 1 - (r-1)δ in a moment recurrence vanished.
    #[error("degenerate recurrence: 1-(r-1)delta vanishes at order {order}")]
    DegenerateRecurrence { order: usize },

    /// The operation requires a class-C model (δ ≤ 0 or finite support).
    #[error("model is outside class C (delta > 0 with infinite support)")]
    OutsideClassC,

    /// A difference energy left the overflow guard; the function is outside
    /// the numeric analogue of H^{m,n}.
    #[error("difference energy diverged at order {order}")]
    EnergyDiverged { order: usize },

    /// Gram matrix numerically singular during orthonormalization.
    #[error("rank deficiency at degree {degree}: norm ratio {ratio:e}")]
    RankDeficient { degree: usize, ratio: f64 },

    /// Malformed input (CLI parameters, model files, tables).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Expression parse error with position and expectation set.
    #[error("parse error at column {position}: expected {expected}")]
    Parse { position: usize, expected: String },

    /// A test-function table does not cover the required window.
    #[error("test function not evaluable at j = {at}: table covers [{lo}, {hi}]")]
    FunctionDomain { at: i64, lo: i64, hi: i64 },

    /// A summation left the overflow guard.
    #[error("overflow guard tripped during summation")]
    OverflowGuard,

    /// A branch the case analysis proves unreachable was reached.
    #[error("internal error: {0}")]
    Internal(String),
}
