//! Exact linear and mixed-binary programming.
//!
//! Every market clearing in the crate is a [`LinearProgram`]
//!
//! ```text
//! minimize    cᵀx
//! subject to  A_eq x  = b_eq      (λ, free)
//!             A_ub x ≤ b_ub       (μ ≥ 0)
//!             l ≤ x ≤ u           (z_lo ≥ 0, z_up ≥ 0)
//! ```
//!
//! Multipliers follow the sensitivity convention: `λ = ∂obj/∂b_eq`, so the
//! dual of a nodal balance row is the nodal price. Stationarity reads
//! `c − A_eqᵀλ + A_ubᵀμ − z_lo + z_up = 0`. Infinite bounds are encoded as
//! `±f64::INFINITY` and always carry a zero multiplier.

mod bnb;
mod kkt;
pub mod matrix;
mod qp;
mod simplex;

pub use bnb::{
    solve_mbp, BnbSettings, LpNodeSolver, MbpSolution, MixedBinaryProgram, NodeOutcome,
    NodeSolver, QpNodeSolver,
};
pub use kkt::{certificate_audit, verify_kkt, CertificateAudit, KktResiduals};
pub use matrix::Matrix;
pub use qp::{solve_qp, QpSolution, QuadraticProgram};
pub use simplex::solve_lp;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("program is infeasible")]
    Infeasible,
    #[error("program is unbounded")]
    Unbounded,
    #[error("branch-and-bound node limit of {0} exceeded")]
    NodeLimitExceeded(usize),
    #[error("branch-and-bound time budget exceeded")]
    TimeLimitExceeded,
}

/// Solver tolerances shared by the LP, QP and branch-and-bound layers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Absolute primal feasibility tolerance.
    pub feas_tol: f64,
    /// Relative duality-gap tolerance.
    pub duality_tol: f64,
    /// Smallest pivot magnitude accepted by the simplex ratio test.
    pub pivot_tol: f64,
    /// Relative optimality gap for branch-and-bound pruning.
    pub opt_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            duality_tol: 1e-8,
            pivot_tol: 1e-10,
            opt_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: Matrix,
    pub eq_rhs: Vec<f64>,
    pub ub_matrix: Matrix,
    pub ub_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// Program with `n` variables bounded below by zero and no rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_matrix: Matrix::with_cols(n),
            eq_rhs: Vec::new(),
            ub_matrix: Matrix::with_cols(n),
            ub_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: &[f64], rhs: f64) -> usize {
        self.eq_matrix.push_row(row);
        self.eq_rhs.push(rhs);
        self.eq_rhs.len() - 1
    }

    pub fn add_ub(&mut self, row: &[f64], rhs: f64) -> usize {
        self.ub_matrix.push_row(row);
        self.ub_rhs.push(rhs);
        self.ub_rhs.len() - 1
    }

    /// Adds `row·x ≥ rhs` as `−row·x ≤ −rhs`.
    pub fn add_lb(&mut self, row: &[f64], rhs: f64) -> usize {
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        self.add_ub(&neg, -rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let fail = |m: &str| Err(LpError::Malformed(m.to_string()));
        if self.eq_matrix.ncols() != n || self.ub_matrix.ncols() != n {
            return fail("matrix column count differs from objective length");
        }
        if self.eq_matrix.nrows() != self.eq_rhs.len() || self.ub_matrix.nrows() != self.ub_rhs.len() {
            return fail("row count differs from rhs length");
        }
        if self.lower.len() != n || self.upper.len() != n {
            return fail("bound vectors have the wrong length");
        }
        let finite_data = self.objective.iter().all(|v| v.is_finite())
            && self.eq_matrix.data().iter().all(|v| v.is_finite())
            && self.ub_matrix.data().iter().all(|v| v.is_finite())
            && self.eq_rhs.iter().all(|v| v.is_finite())
            && self.ub_rhs.iter().all(|v| v.is_finite());
        if !finite_data {
            return fail("non-finite coefficient");
        }
        if self.lower.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || self.upper.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY)
        {
            return fail("invalid bound");
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        matrix::dot(&self.objective, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub ub_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    pub(crate) fn without_solution(status: LpStatus) -> Self {
        Self {
            status,
            primal: Vec::new(),
            eq_duals: Vec::new(),
            ub_duals: Vec::new(),
            lower_duals: Vec::new(),
            upper_duals: Vec::new(),
            objective: match status {
                LpStatus::Infeasible => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `λ·b_eq − μ·b_ub + z_lo·l − z_up·u` over finite bounds.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut v = matrix::dot(&self.eq_duals, &lp.eq_rhs) - matrix::dot(&self.ub_duals, &lp.ub_rhs);
        for j in 0..lp.num_vars() {
            if lp.lower[j].is_finite() {
                v += self.lower_duals[j] * lp.lower[j];
            }
            if lp.upper[j].is_finite() {
                v -= self.upper_duals[j] * lp.upper[j];
            }
        }
        v
    }
}
