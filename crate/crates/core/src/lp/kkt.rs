use super::matrix::dot;
use super::{LinearProgram, LpSolution};
use std::sync::atomic::{AtomicU64, Ordering};

static OPTIMAL_SOLVES: AtomicU64 = AtomicU64::new(0);
static WORST_RESIDUAL_BITS: AtomicU64 = AtomicU64::new(0);

/// Process-wide record of the certificates produced by [`super::solve_lp`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateAudit {
    pub optimal_solves: u64,
    pub worst_residual: f64,
}

pub(crate) fn record_certificate(residual: f64) {
    OPTIMAL_SOLVES.fetch_add(1, Ordering::Relaxed);
    // nonnegative floats order like their bit patterns
    WORST_RESIDUAL_BITS.fetch_max(residual.max(0.0).to_bits(), Ordering::Relaxed);
}

pub fn certificate_audit() -> CertificateAudit {
    CertificateAudit {
        optimal_solves: OPTIMAL_SOLVES.load(Ordering::Relaxed),
        worst_residual: f64::from_bits(WORST_RESIDUAL_BITS.load(Ordering::Relaxed)),
    }
}

/// Largest violation of each optimality condition; all entries are nonnegative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
    pub complementarity: f64,
    /// `|primal objective − dual objective|`.
    pub duality_gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }
}

/// Evaluates an optimality certificate against the program it claims to solve.
pub fn verify_kkt(lp: &LinearProgram, sol: &LpSolution) -> KktResiduals {
    let n = lp.num_vars();
    let x = &sol.primal;
    let mut r = KktResiduals::default();

    let mut grad = lp.objective.clone();
    for (g, v) in grad.iter_mut().zip(lp.eq_matrix.tr_mul_vec(&sol.eq_duals)) {
        *g -= v;
    }
    for (g, v) in grad.iter_mut().zip(lp.ub_matrix.tr_mul_vec(&sol.ub_duals)) {
        *g += v;
    }
    for j in 0..n {
        grad[j] += sol.upper_duals[j] - sol.lower_duals[j];
        r.stationarity = r.stationarity.max(grad[j].abs());
    }

    for (row, &b) in lp.eq_matrix.rows().zip(&lp.eq_rhs) {
        r.primal_feasibility = r.primal_feasibility.max((dot(row, x) - b).abs());
    }
    for ((row, &b), &mu) in lp.ub_matrix.rows().zip(&lp.ub_rhs).zip(&sol.ub_duals) {
        let slack = b - dot(row, x);
        r.primal_feasibility = r.primal_feasibility.max(-slack);
        r.dual_feasibility = r.dual_feasibility.max(-mu);
        r.complementarity = r.complementarity.max((mu * slack).abs());
    }
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let (zl, zu) = (sol.lower_duals[j], sol.upper_duals[j]);
        if l.is_finite() {
            r.primal_feasibility = r.primal_feasibility.max(l - x[j]);
            r.complementarity = r.complementarity.max((zl * (x[j] - l)).abs());
            r.dual_feasibility = r.dual_feasibility.max(-zl);
        } else {
            r.dual_feasibility = r.dual_feasibility.max(zl.abs());
        }
        if u.is_finite() {
            r.primal_feasibility = r.primal_feasibility.max(x[j] - u);
            r.complementarity = r.complementarity.max((zu * (u - x[j])).abs());
            r.dual_feasibility = r.dual_feasibility.max(-zu);
        } else {
            r.dual_feasibility = r.dual_feasibility.max(zu.abs());
        }
    }
    r.duality_gap = (lp.objective_value(x) - sol.dual_objective(lp)).abs();
    r
}
