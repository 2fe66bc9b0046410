//! Fidelity restoration: the demand closest to the noisy release whose gas
//! market, at a fixed commitment, clears with an objective and prices inside
//! bands around the estimates.
//!
//! The gas market is replaced by its KKT conditions with the demand entering
//! the balance right-hand side. Complementarity becomes big-M rows over one
//! binary per pair, and the squared distance to the release is minimized by
//! branch-and-bound over convex QP relaxations.

mod kkt;

pub use kkt::{big_m_linearize, build_kkt, widen, ComplementarityPair, KktSystem};

use crate::lp::{
    solve_lp, solve_mbp, solve_qp, verify_kkt, BnbSettings, LinearProgram, LpError, LpSolution, LpStatus,
    Matrix, QpNodeSolver, QuadraticProgram, Tolerances,
};
use crate::markets::{em_program, gas_burn, gm_program, MarketError, PublicMarket};
use crate::predictors::FollowerEstimates;
use crate::privacy::ObfuscatedDemand;
use std::time::Duration;
use thiserror::Error;

pub const ORACLE_PAIR_CAP: usize = 14;
const SATURATION_FRACTION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Laplace,
    PpsmP,
    Ppsm,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Laplace, Variant::PpsmP, Variant::Ppsm];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Laplace => "Laplace",
            Self::PpsmP => "PPSM_p",
            Self::Ppsm => "PPSM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn index(&self) -> u64 {
        *self as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityProblem {
    pub obf: ObfuscatedDemand,
    pub commitment: Vec<bool>,
    pub estimates: FollowerEstimates,
    /// Half-width of the objective band, cost units.
    pub eta_p: f64,
    /// Half-width of the per-node price band, cost units per MWh.
    pub eta_d: f64,
    pub variant: Variant,
}

/// Converts a percentage into absolute half-widths using only the estimates:
/// `η_p = pct·|Ō|`, `η_d = pct·mean|ȳ|`.
pub fn eta_from_pct(pct: f64, estimates: &FollowerEstimates) -> (f64, f64) {
    let f = pct / 100.0;
    let n = estimates.duals.len().max(1) as f64;
    let mean = estimates.duals.iter().map(|v| v.abs()).sum::<f64>() / n;
    (f * estimates.objective.abs(), f * mean)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityConfig {
    pub tol: Tolerances,
    /// Deterministic budget; exceeding it reports a timeout.
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub max_escalations: usize,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            node_limit: 20_000,
            time_limit: Some(Duration::from_secs(60)),
            max_escalations: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FidelityStatus {
    Optimal,
    Infeasible,
    Timeout,
}

impl FidelityStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Optimal => "Optimal",
            Self::Infeasible => "Infeasible",
            Self::Timeout => "Timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityResult {
    pub status: FidelityStatus,
    pub d_hat: Vec<f64>,
    pub follower_primal: Vec<f64>,
    pub follower_duals: Vec<f64>,
    /// `‖D̂ − D̃‖₂²`.
    pub distance: f64,
    /// Largest violation of the KKT rows and fidelity bands at the returned point.
    pub residuals: f64,
    pub escalations: usize,
    pub nodes: usize,
}

impl FidelityResult {
    fn without_solution(status: FidelityStatus, escalations: usize, nodes: usize) -> Self {
        Self {
            status,
            d_hat: Vec::new(),
            follower_primal: Vec::new(),
            follower_duals: Vec::new(),
            distance: f64::INFINITY,
            residuals: f64::INFINITY,
            escalations,
            nodes,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FidelityError {
    #[error("the Laplace variant has no fidelity phase")]
    NotApplicable,
    #[error("{0} complementarity pairs exceed the oracle cap")]
    TooLarge(usize),
    #[error("big-M bounds still saturated after {0} escalations")]
    BigMSaturated(usize),
    #[error("a-posteriori check failed: {0}")]
    CertificateFailed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A parametric lower level with fidelity bands, ready to linearize.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedKkt {
    pub kkt: KktSystem,
    pub param_map: Matrix,
    pub target: Vec<f64>,
    pub objective_estimate: f64,
    pub eta_p: f64,
    pub dual_band: Option<(Vec<f64>, f64)>,
}

impl BandedKkt {
    /// KKT system of `lower` with `θ ≥ 0`, the objective band, and the dual
    /// band on the equality duals when `dual_band` is given.
    pub fn new(
        lower: &LinearProgram,
        param_map: Matrix,
        target: Vec<f64>,
        objective_estimate: f64,
        eta_p: f64,
        dual_band: Option<(Vec<f64>, f64)>,
    ) -> Self {
        let mut kkt = build_kkt(lower, &param_map);
        for i in 0..kkt.n_param {
            kkt.constraints.set_bounds(kkt.theta(i), 0.0, f64::INFINITY);
        }
        let obj = kkt.objective_row();
        kkt.constraints.add_ub(&obj, objective_estimate + eta_p);
        kkt.constraints.add_lb(&obj, objective_estimate - eta_p);
        if let Some((y, eta_d)) = &dual_band {
            for (i, yi) in y.iter().enumerate() {
                kkt.constraints.set_bounds(kkt.lambda(i), yi - eta_d, yi + eta_d);
            }
        }
        Self {
            kkt,
            param_map,
            target,
            objective_estimate,
            eta_p,
            dual_band,
        }
    }

    /// Initial big-M values: `10 ×` the slack range (or the right-hand-side
    /// range when unbounded) and `10 ×` the largest cost coefficient.
    pub fn initial_big_m(&self) -> (Vec<f64>, Vec<f64>) {
        let lower = &self.kkt.lower;
        let rhs_range = lower
            .eq_rhs
            .iter()
            .chain(&lower.ub_rhs)
            .chain(&self.target)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let cmax = lower.objective.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let band = self.dual_band.as_ref().map_or(0.0, |(y, e)| y.iter().fold(0.0f64, |m, v| m.max(v.abs())) + e);
        let mp = self
            .kkt
            .pairs
            .iter()
            .map(|p| 10.0 * if p.slack_range.is_finite() { p.slack_range.max(1.0) } else { 1.0 + rhs_range })
            .collect();
        let md = vec![10.0 * (1.0 + cmax + band); self.kkt.pairs.len()];
        (mp, md)
    }

    fn split(&self, v: &[f64]) -> Candidate {
        let k = &self.kkt;
        let n = k.n_primal();
        let m_eq = k.lower.eq_rhs.len();
        let m_ub = k.lower.ub_rhs.len();
        let theta: Vec<f64> = (0..k.n_param).map(|i| v[k.theta(i)]).collect();
        let mut sol = LpSolution {
            status: LpStatus::Optimal,
            primal: (0..n).map(|j| v[k.x(j)]).collect(),
            eq_duals: (0..m_eq).map(|i| v[k.lambda(i)]).collect(),
            ub_duals: (0..m_ub).map(|i| v[k.mu(i)]).collect(),
            lower_duals: vec![0.0; n],
            upper_duals: vec![0.0; n],
            objective: 0.0,
        };
        for (q, &j) in k.lower_ix.iter().enumerate() {
            sol.lower_duals[j] = v[k.z_lo(q)];
        }
        for (q, &j) in k.upper_ix.iter().enumerate() {
            sol.upper_duals[j] = v[k.z_up(q)];
        }
        sol.objective = k.lower.objective_value(&sol.primal);
        Candidate { theta, sol }
    }

    /// Re-solves the lower level at θ and measures every fidelity condition.
    fn certify(&self, c: &Candidate, tol: &Tolerances) -> Result<f64, FidelityError> {
        let lp = self.kkt.lower_at(&self.param_map, &c.theta);
        let kkt_res = verify_kkt(&lp, &c.sol).max();
        let resolved = solve_lp(&lp, tol)?;
        if resolved.status != LpStatus::Optimal {
            return Err(FidelityError::CertificateFailed("lower level infeasible at the restored demand".into()));
        }
        let scale = 1.0 + self.objective_estimate.abs();
        let obj_gap = (resolved.objective - c.sol.objective).abs() / scale;
        let band_p = ((c.sol.objective - self.objective_estimate).abs() - self.eta_p).max(0.0) / scale;
        let band_d = match &self.dual_band {
            Some((y, e)) => c
                .sol
                .eq_duals
                .iter()
                .zip(y)
                .map(|(a, b)| ((a - b).abs() - e).max(0.0))
                .fold(0.0, f64::max),
            None => 0.0,
        };
        let neg = c.theta.iter().fold(0.0f64, |m, v| m.max(-v));
        Ok(kkt_res.max(obj_gap).max(band_p).max(band_d).max(neg))
    }

    fn result(&self, v: &[f64], objective: f64, escalations: usize, nodes: usize, tol: &Tolerances) -> Result<FidelityResult, FidelityError> {
        let c = self.split(v);
        let residuals = self.certify(&c, tol)?;
        Ok(FidelityResult {
            status: FidelityStatus::Optimal,
            d_hat: c.theta,
            follower_primal: c.sol.primal,
            follower_duals: c.sol.eq_duals,
            distance: objective.max(0.0),
            residuals,
            escalations,
            nodes,
        })
    }

    fn saturated(&self, v: &[f64], mp: &[f64], md: &[f64]) -> bool {
        self.kkt.pairs.iter().enumerate().any(|(i, p)| {
            p.slack(v) >= (1.0 - SATURATION_FRACTION) * mp[i] || v[p.dual] >= (1.0 - SATURATION_FRACTION) * md[i]
        })
    }

    /// Global optimum by branch-and-bound on the big-M program, escalating
    /// saturated big-M bounds.
    pub fn solve(&self, cfg: &FidelityConfig) -> Result<FidelityResult, FidelityError> {
        let (mut mp, mut md) = self.initial_big_m();
        let settings = BnbSettings {
            tol: cfg.tol,
            node_limit: cfg.node_limit,
            time_limit: cfg.time_limit,
        };
        let mut escalations = 0;
        loop {
            let mbp = big_m_linearize(&self.kkt, &self.target, &mp, &md);
            let sol = match solve_mbp(&mbp, &QpNodeSolver, &settings) {
                Ok(s) => s,
                Err(LpError::Infeasible) => {
                    return Ok(FidelityResult::without_solution(FidelityStatus::Infeasible, escalations, 0))
                }
                Err(LpError::NodeLimitExceeded(n)) => {
                    return Ok(FidelityResult::without_solution(FidelityStatus::Timeout, escalations, n))
                }
                Err(LpError::TimeLimitExceeded) => {
                    return Ok(FidelityResult::without_solution(FidelityStatus::Timeout, escalations, 0))
                }
                Err(e) => return Err(e.into()),
            };
            if !self.saturated(&sol.x, &mp, &md) {
                return self.result(&sol.x, sol.objective, escalations, sol.nodes, &cfg.tol);
            }
            if escalations == cfg.max_escalations {
                return Err(FidelityError::BigMSaturated(escalations));
            }
            escalations += 1;
            mp.iter_mut().chain(md.iter_mut()).for_each(|m| *m *= 10.0);
        }
    }

    /// Exhaustive complementarity patterns: bit set forces the slack to zero,
    /// bit clear forces the dual to zero. Ties keep the first pattern.
    pub fn enumerate(&self, cfg: &FidelityConfig) -> Result<FidelityResult, FidelityError> {
        let np = self.kkt.pairs.len();
        if np > ORACLE_PAIR_CAP {
            return Err(FidelityError::TooLarge(np));
        }
        let nv = self.kkt.num_vars();
        let mut h = Matrix::zeros(nv, nv);
        let mut base = self.kkt.constraints.clone();
        for (i, t) in self.target.iter().enumerate() {
            let j = self.kkt.theta(i);
            h.set(j, j, 2.0);
            base.objective[j] = -2.0 * t;
        }
        let constant: f64 = self.target.iter().map(|t| t * t).sum();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for mask in 0..1u64 << np {
            let mut lp = base.clone();
            for (i, p) in self.kkt.pairs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    let mut row = vec![0.0; nv];
                    for &(j, a) in &p.coeffs {
                        row[j] += a;
                    }
                    lp.add_eq(&row, -p.constant);
                } else {
                    lp.upper[p.dual] = 0.0;
                }
            }
            let qp = QuadraticProgram {
                lp,
                hessian: h.clone(),
                constant,
            };
            let s = solve_qp(&qp, &cfg.tol)?;
            if s.status != LpStatus::Optimal {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| s.objective < *b) {
                best = Some((s.x, s.objective));
            }
        }
        match best {
            Some((x, obj)) => self.result(&x, obj, 0, 1 << np, &cfg.tol),
            None => Ok(FidelityResult::without_solution(FidelityStatus::Infeasible, 0, 1 << np)),
        }
    }
}

struct Candidate {
    theta: Vec<f64>,
    sol: LpSolution,
}

impl FidelityProblem {
    /// The banded KKT system of the gas market at the fixed commitment, or
    /// `None` when the electricity market cannot clear that commitment.
    pub fn banded_kkt(&self, public: &PublicMarket, tol: &Tolerances) -> Result<Option<BandedKkt>, FidelityError> {
        if self.variant == Variant::Laplace {
            return Err(FidelityError::NotApplicable);
        }
        let len = public.dims.gas_len();
        if self.obf.len() != len || self.estimates.duals.len() != len || self.commitment.len() != public.dims.n_gen {
            return Err(FidelityError::Dimension("problem does not match the market".into()));
        }
        let em = solve_lp(&em_program(public, &self.commitment), tol)?;
        if em.status != LpStatus::Optimal {
            return Ok(None);
        }
        let burn = gas_burn(public, &em.primal);
        let lower = gm_program(public, &burn);
        let mut identity = Matrix::zeros(len, len);
        for i in 0..len {
            identity.set(i, i, 1.0);
        }
        let dual_band = (self.variant == Variant::Ppsm).then(|| (self.estimates.duals.clone(), self.eta_d));
        Ok(Some(BandedKkt::new(
            &lower,
            identity,
            self.obf.values().to_vec(),
            self.estimates.objective,
            self.eta_p,
            dual_band,
        )))
    }
}

/// Restores fidelity of the released demand.
pub fn solve_fidelity(
    fp: &FidelityProblem,
    public: &PublicMarket,
    cfg: &FidelityConfig,
) -> Result<FidelityResult, FidelityError> {
    match fp.banded_kkt(public, &cfg.tol)? {
        Some(b) => b.solve(cfg),
        None => Ok(FidelityResult::without_solution(FidelityStatus::Infeasible, 0, 0)),
    }
}

/// Exhaustive-pattern oracle for [`solve_fidelity`].
pub fn enumerate_fidelity_oracle(
    fp: &FidelityProblem,
    public: &PublicMarket,
    cfg: &FidelityConfig,
) -> Result<FidelityResult, FidelityError> {
    match fp.banded_kkt(public, &cfg.tol)? {
        Some(b) => b.enumerate(cfg),
        None => Ok(FidelityResult::without_solution(FidelityStatus::Infeasible, 0, 0)),
    }
}

#[cfg(test)]
mod tests;
