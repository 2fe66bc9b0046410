use super::Baseline;
use crate::lp::Tolerances;
use crate::markets::{solve_full_stackelberg, MarketError, MarketInstance};

/// One mechanism run, as written to a results table.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub variant: String,
    pub alpha: f64,
    pub eta_pct: f64,
    pub stress_e: f64,
    pub stress_g: f64,
    pub rep: u64,
    pub seed: u64,
    /// The true game has an equilibrium; runs on instances without one count
    /// as unsatisfied.
    pub baseline: bool,
    pub satisfied: bool,
    pub timeout: bool,
    /// Step at which the mechanism stopped, `-` when it released a demand.
    pub fail_step: String,
    pub l1_error: f64,
    pub delta_uc_pct: f64,
    pub delta_e_pct: f64,
    pub delta_g_pct: f64,
    pub thm4_premise: bool,
    pub thm4_lhs: f64,
    pub thm4_rhs: f64,
    pub thm5_status: String,
    pub thm5_lhs: f64,
    pub thm5_rhs: f64,
    pub nodes: usize,
}

/// Outcome of clearing the game on a released demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub satisfied: bool,
    pub l1_error: f64,
    pub delta_uc_pct: f64,
    pub delta_e_pct: f64,
    pub delta_g_pct: f64,
}

fn rel_pct(truth: f64, other: f64) -> f64 {
    if truth == 0.0 {
        if other == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        (truth - other).abs() / truth.abs() * 100.0
    }
}

/// Clears the game on `release` and compares it with the true equilibrium.
/// Deltas are `NaN` when either side has no equilibrium.
pub fn evaluate(
    inst: &MarketInstance,
    baseline: &Baseline,
    release: &[f64],
    tol: &Tolerances,
) -> Result<Evaluation, MarketError> {
    let l1_error = release.iter().zip(inst.sensitive.values()).map(|(a, b)| (a - b).abs()).sum();
    let cleared = match solve_full_stackelberg(&inst.public, release, tol) {
        Ok(s) => Some(s),
        Err(MarketError::Infeasible) => None,
        Err(e) => return Err(e),
    };
    let mut ev = Evaluation {
        satisfied: cleared.is_some(),
        l1_error,
        delta_uc_pct: f64::NAN,
        delta_e_pct: f64::NAN,
        delta_g_pct: f64::NAN,
    };
    if let (Some(s), Some(b)) = (cleared, baseline.solution.as_ref()) {
        ev.delta_uc_pct = rel_pct(b.leader_objective, s.leader_objective);
        ev.delta_e_pct = rel_pct(b.em_objective, s.em_objective);
        ev.delta_g_pct = rel_pct(b.gm_objective, s.gm_objective);
    }
    Ok(ev)
}
