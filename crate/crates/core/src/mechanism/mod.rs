//! The release pipeline: obfuscate the gas demand, forecast gas prices, fix a
//! commitment, forecast the gas market at that commitment, and restore
//! fidelity of the release.
//!
//! Only [`Baseline::prepare`] and the obfuscation step read the sensitive
//! demand. Every later step receives the release and public data.

mod evaluate;
mod trace;
mod verify;

pub use evaluate::{evaluate, Evaluation, RunRecord};
pub use trace::{trace_doc, TRACE_KIND};
pub use verify::{check_theorem4, check_theorem5, Thm4Report, Thm5Report, Thm5Status};

use crate::fidelity::{
    eta_from_pct, solve_fidelity, FidelityConfig, FidelityError, FidelityProblem, FidelityResult, FidelityStatus,
    Variant,
};
use crate::lp::{BnbSettings, Tolerances};
use crate::markets::{solve_full_stackelberg, solve_leader_given_duals, MarketError, MarketInstance, StackelbergSolution};
use crate::predictors::{
    leader_view_fallback, predict_follower_view, predict_follower_view_released, predict_leader_view,
    predict_leader_view_released, EstimateSource, FollowerEstimates, PredictionError, PredictorConfig,
    ReleasedOutcomes,
};
use crate::privacy::{obfuscate, ObfuscatedDemand, PrivacyParams};
use crate::rng::{derive_seed, SeededRng};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpsmConfig {
    pub privacy: PrivacyParams,
    pub eta_p_pct: f64,
    pub eta_d_pct: f64,
    /// Forecast of gas prices used to fix the commitment.
    pub leader_predictor: PredictorConfig,
    /// Forecast of the gas market's objective and prices at that commitment.
    pub follower_predictor: PredictorConfig,
    pub variant: Variant,
    pub fidelity: FidelityConfig,
    pub bnb: BnbSettings,
    pub seed: u64,
}

impl PpsmConfig {
    pub fn new(variant: Variant, alpha: f64, eta_pct: f64, seed: u64) -> Result<Self, MechanismError> {
        let privacy = PrivacyParams::with_alpha(alpha).map_err(|e| MechanismError::Config(e.to_string()))?;
        let cfg = Self {
            privacy,
            eta_p_pct: eta_pct,
            eta_d_pct: eta_pct,
            leader_predictor: PredictorConfig::default(),
            follower_predictor: PredictorConfig {
                noise_fraction: 0.0,
                ..PredictorConfig::default()
            },
            variant,
            fidelity: FidelityConfig::default(),
            bnb: BnbSettings::default(),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        self.privacy.validate().map_err(|e| MechanismError::Config(e.to_string()))?;
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.eta_p_pct) || !ok(self.eta_d_pct) {
            return Err(MechanismError::Config("fidelity percentages must be nonnegative".into()));
        }
        if !ok(self.leader_predictor.noise_fraction) || !ok(self.follower_predictor.noise_fraction) {
            return Err(MechanismError::Config("noise fractions must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn tol(&self) -> &Tolerances {
        &self.fidelity.tol
    }
}

/// Mechanism step, for failure attribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Obfuscate,
    LeaderView,
    LeaderCommit,
    FollowerView,
    Fidelity,
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Obfuscate => "obfuscate",
            Self::LeaderView => "leader_view",
            Self::LeaderCommit => "leader_commit",
            Self::FollowerView => "follower_view",
            Self::Fidelity => "fidelity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FailureKind {
    Infeasible,
    Timeout,
    Other(String),
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MechanismError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step {} failed: {kind:?}", step.name())]
    StepFailed {
        step: Step,
        kind: FailureKind,
        trace: Box<Trace>,
    },
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// The true-demand equilibrium and the outcomes the markets publish after
/// clearing. Computed once per instance and shared by every run on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Baseline {
    pub solution: Option<StackelbergSolution>,
    pub released: ReleasedOutcomes,
}

impl Baseline {
    pub fn prepare(inst: &MarketInstance, tol: &Tolerances) -> Result<Self, MarketError> {
        let solution = match solve_full_stackelberg(&inst.public, inst.sensitive.values(), tol) {
            Ok(s) => Some(s),
            Err(MarketError::Infeasible) => None,
            Err(e) => return Err(e),
        };
        let released = ReleasedOutcomes::with_baseline(inst, solution.as_ref(), tol)?;
        Ok(Self { solution, released })
    }
}

/// Every intermediate of one mechanism run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub variant: Variant,
    pub obfuscated: ObfuscatedDemand,
    pub leader_prices: Option<Vec<f64>>,
    pub leader_fallback: bool,
    pub commitment: Option<Vec<bool>>,
    pub estimates: Option<FollowerEstimates>,
    pub eta_p: f64,
    pub eta_d: f64,
    pub fidelity: Option<FidelityResult>,
    pub release: Option<Vec<f64>>,
}

fn fail(step: Step, kind: FailureKind, trace: &Trace) -> MechanismError {
    MechanismError::StepFailed {
        step,
        kind,
        trace: Box::new(trace.clone()),
    }
}

fn other(e: impl std::fmt::Display) -> FailureKind {
    FailureKind::Other(e.to_string())
}

/// Runs the mechanism with a freshly computed baseline.
pub fn run_mechanism(inst: &MarketInstance, cfg: &PpsmConfig) -> Result<(Vec<f64>, Trace), MechanismError> {
    let baseline = Baseline::prepare(inst, cfg.tol())?;
    run_mechanism_with(inst, &baseline, cfg)
}

/// Runs the mechanism, returning the released demand and the trace.
pub fn run_mechanism_with(
    inst: &MarketInstance,
    baseline: &Baseline,
    cfg: &PpsmConfig,
) -> Result<(Vec<f64>, Trace), MechanismError> {
    cfg.validate()?;
    let mut rng = SeededRng::new(derive_seed(cfg.seed, &[1]));
    let obf = obfuscate(&inst.sensitive, &cfg.privacy, &mut rng);
    release_from(&inst.public, &baseline.released, obf, cfg)
}

/// Steps after obfuscation; never sees the sensitive demand.
fn release_from(
    public: &crate::markets::PublicMarket,
    released: &ReleasedOutcomes,
    obf: ObfuscatedDemand,
    cfg: &PpsmConfig,
) -> Result<(Vec<f64>, Trace), MechanismError> {
    let tol = cfg.tol();
    let mut trace = Trace {
        variant: cfg.variant,
        obfuscated: obf.clone(),
        leader_prices: None,
        leader_fallback: false,
        commitment: None,
        estimates: None,
        eta_p: 0.0,
        eta_d: 0.0,
        fidelity: None,
        release: None,
    };
    if cfg.variant == Variant::Laplace {
        let d = obf.values().to_vec();
        trace.release = Some(d.clone());
        return Ok((d, trace));
    }

    let mut rng = SeededRng::new(derive_seed(cfg.seed, &[2]));
    let lp = &cfg.leader_predictor;
    let view = match lp.source {
        EstimateSource::ObfuscatedData => predict_leader_view(public, &obf, lp, &mut rng, tol),
        EstimateSource::ReleasedOutcomes => predict_leader_view_released(released, lp, &mut rng),
    };
    let prices = match view {
        Ok(y) => y,
        Err(PredictionError::PredictionFailed(_)) => {
            log::debug!("leader view failed; using fallback prices");
            trace.leader_fallback = true;
            leader_view_fallback(public, &obf, lp, &mut rng, tol, &cfg.bnb)
                .map_err(|e| fail(Step::LeaderView, other(e), &trace))?
        }
        Err(e) => return Err(fail(Step::LeaderView, other(e), &trace)),
    };
    trace.leader_prices = Some(prices.clone());

    let decision = match solve_leader_given_duals(public, &prices, &cfg.bnb) {
        Ok(d) => d,
        Err(MarketError::Infeasible) => return Err(fail(Step::LeaderCommit, FailureKind::Infeasible, &trace)),
        Err(MarketError::Lp(crate::lp::LpError::NodeLimitExceeded(_) | crate::lp::LpError::TimeLimitExceeded)) => {
            return Err(fail(Step::LeaderCommit, FailureKind::Timeout, &trace))
        }
        Err(e) => return Err(fail(Step::LeaderCommit, other(e), &trace)),
    };
    trace.commitment = Some(decision.commitment.clone());

    let mut rng = SeededRng::new(derive_seed(cfg.seed, &[3]));
    let fpc = &cfg.follower_predictor;
    let est = match fpc.source {
        EstimateSource::ObfuscatedData => {
            predict_follower_view(&decision.commitment, public, &obf, fpc, &mut rng, tol)
        }
        EstimateSource::ReleasedOutcomes => {
            predict_follower_view_released(&decision.commitment, released, fpc, &mut rng)
        }
    };
    let est = match est {
        Ok(e) => e,
        Err(PredictionError::ChainInfeasible) => {
            return Err(fail(Step::FollowerView, FailureKind::Infeasible, &trace))
        }
        Err(e) => return Err(fail(Step::FollowerView, other(e), &trace)),
    };
    let (eta_p, _) = eta_from_pct(cfg.eta_p_pct, &est);
    let (_, eta_d) = eta_from_pct(cfg.eta_d_pct, &est);
    trace.estimates = Some(est.clone());
    trace.eta_p = eta_p;
    trace.eta_d = eta_d;

    let fp = FidelityProblem {
        obf,
        commitment: decision.commitment,
        estimates: est,
        eta_p,
        eta_d,
        variant: cfg.variant,
    };
    let r = match solve_fidelity(&fp, public, &cfg.fidelity) {
        Ok(r) => r,
        Err(e @ FidelityError::BigMSaturated(_)) => return Err(fail(Step::Fidelity, other(e), &trace)),
        Err(e) => return Err(fail(Step::Fidelity, other(e), &trace)),
    };
    let status = r.status;
    trace.fidelity = Some(r);
    match status {
        FidelityStatus::Optimal => {}
        FidelityStatus::Infeasible => return Err(fail(Step::Fidelity, FailureKind::Infeasible, &trace)),
        FidelityStatus::Timeout => return Err(fail(Step::Fidelity, FailureKind::Timeout, &trace)),
    }
    let d = trace.fidelity.as_ref().map(|r| r.d_hat.clone()).unwrap_or_default();
    trace.release = Some(d.clone());
    Ok((d, trace))
}
