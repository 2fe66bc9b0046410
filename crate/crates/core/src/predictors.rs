//! Stand-ins for the leader's and the gas market's forecasting models.
//!
//! Two estimate sources are offered. `ObfuscatedData` runs the exact market
//! oracle on the released demand D̃. `ReleasedOutcomes` perturbs the gas-market
//! outcomes that the market publishes after clearing (total cost and nodal
//! prices), which never exposes the demand vector itself. Both add Normal
//! noise with one shared σ.

use crate::lp::{BnbSettings, Tolerances};
use crate::markets::{
    solve_follower_chain, solve_full_stackelberg, solve_leader_given_duals, MarketError, MarketInstance,
    PublicMarket, StackelbergSolution,
};
use crate::privacy::ObfuscatedDemand;
use crate::rng::SeededRng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateSource {
    ObfuscatedData,
    ReleasedOutcomes,
}

impl EstimateSource {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ObfuscatedData => "obfuscated",
            Self::ReleasedOutcomes => "released",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "obfuscated" => Some(Self::ObfuscatedData),
            "released" => Some(Self::ReleasedOutcomes),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorConfig {
    /// σ as a fraction of the mean absolute estimate.
    pub noise_fraction: f64,
    pub source: EstimateSource,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            noise_fraction: 0.10,
            source: EstimateSource::ReleasedOutcomes,
        }
    }
}

impl PredictorConfig {
    pub fn exact(source: EstimateSource) -> Self {
        Self {
            noise_fraction: 0.0,
            source,
        }
    }
}

/// Ō: gas-market objective estimate. ȳ: gas-price estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct FollowerEstimates {
    pub objective: f64,
    pub duals: Vec<f64>,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("no equilibrium on the estimate source: {0}")]
    PredictionFailed(MarketError),
    #[error("follower chain infeasible on the estimate source")]
    ChainInfeasible,
    #[error("negative noise fraction")]
    BadConfig,
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Gas-market outcomes published after clearing the true game: the
/// equilibrium, and the outcome the market would report for any commitment.
#[derive(Clone, Debug, PartialEq)]
pub struct ReleasedOutcomes {
    pub equilibrium: Option<(f64, Vec<f64>)>,
    by_commitment: BTreeMap<Vec<bool>, (f64, Vec<f64>)>,
}

impl ReleasedOutcomes {
    pub fn from_instance(inst: &MarketInstance, tol: &Tolerances) -> Result<Self, MarketError> {
        let baseline = match solve_full_stackelberg(&inst.public, inst.sensitive.values(), tol) {
            Ok(s) => Some(s),
            Err(MarketError::Infeasible) => None,
            Err(e) => return Err(e),
        };
        Self::with_baseline(inst, baseline.as_ref(), tol)
    }

    /// Uses an already computed equilibrium of the true game.
    pub fn with_baseline(
        inst: &MarketInstance,
        baseline: Option<&StackelbergSolution>,
        tol: &Tolerances,
    ) -> Result<Self, MarketError> {
        let p = &inst.public;
        let mut by_commitment = BTreeMap::new();
        for x in crate::markets::commitments(p.dims.n_gen) {
            match solve_follower_chain(p, &x, inst.sensitive.values(), tol) {
                Ok(c) => {
                    by_commitment.insert(x, (c.gm.objective, c.gas_prices().to_vec()));
                }
                Err(MarketError::StageInfeasible(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self {
            equilibrium: baseline.map(|s| (s.gm_objective, s.gas_prices().to_vec())),
            by_commitment,
        })
    }

    pub fn at(&self, commitment: &[bool]) -> Option<&(f64, Vec<f64>)> {
        self.by_commitment.get(commitment)
    }
}

fn check(cfg: &PredictorConfig) -> Result<(), PredictionError> {
    if cfg.noise_fraction >= 0.0 && cfg.noise_fraction.is_finite() {
        Ok(())
    } else {
        Err(PredictionError::BadConfig)
    }
}

/// Adds i.i.d. Normal noise with σ = fraction · mean |v|.
pub fn perturb(v: &[f64], fraction: f64, rng: &mut SeededRng) -> Vec<f64> {
    if fraction == 0.0 || v.is_empty() {
        return v.to_vec();
    }
    let sigma = fraction * v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x + rng.normal(sigma)).collect()
}

fn perturb_scalar(v: f64, fraction: f64, rng: &mut SeededRng) -> f64 {
    if fraction == 0.0 {
        v
    } else {
        v + rng.normal(fraction * v.abs())
    }
}

/// Leader's estimate of the gas prices from the released demand.
pub fn predict_leader_view(
    public: &PublicMarket,
    obf: &ObfuscatedDemand,
    cfg: &PredictorConfig,
    rng: &mut SeededRng,
    tol: &Tolerances,
) -> Result<Vec<f64>, PredictionError> {
    check(cfg)?;
    match solve_full_stackelberg(public, obf.values(), tol) {
        Ok(s) => Ok(perturb(s.gas_prices(), cfg.noise_fraction, rng)),
        Err(e @ (MarketError::Infeasible | MarketError::StageInfeasible(_))) => {
            Err(PredictionError::PredictionFailed(e))
        }
        Err(e) => Err(e.into()),
    }
}

/// Fallback when the leader view fails: chain duals at the commitment that
/// ignores bid validity, then at the demand clipped to `[0, capacity]`, then
/// the highest supplier cost everywhere.
pub fn leader_view_fallback(
    public: &PublicMarket,
    obf: &ObfuscatedDemand,
    cfg: &PredictorConfig,
    rng: &mut SeededRng,
    tol: &Tolerances,
    bnb: &BnbSettings,
) -> Result<Vec<f64>, PredictionError> {
    check(cfg)?;
    let free = vec![0.0; public.dims.gas_len()];
    if let Ok(d) = solve_leader_given_duals(public, &free, bnb) {
        for demand in [obf.values().to_vec(), clip_demand(public, obf.values())] {
            if let Ok(c) = solve_follower_chain(public, &d.commitment, &demand, tol) {
                return Ok(perturb(c.gas_prices(), cfg.noise_fraction, rng));
            }
        }
    }
    let top = vec![public.max_supplier_cost(); public.dims.gas_len()];
    Ok(perturb(&top, cfg.noise_fraction, rng))
}

/// Leader's price estimate from the published equilibrium outcomes.
pub fn predict_leader_view_released(
    released: &ReleasedOutcomes,
    cfg: &PredictorConfig,
    rng: &mut SeededRng,
) -> Result<Vec<f64>, PredictionError> {
    check(cfg)?;
    match &released.equilibrium {
        Some((_, y)) => Ok(perturb(y, cfg.noise_fraction, rng)),
        None => Err(PredictionError::PredictionFailed(MarketError::Infeasible)),
    }
}

/// Projects demand onto `[0, total supply capacity]`.
pub fn clip_demand(public: &PublicMarket, demand: &[f64]) -> Vec<f64> {
    let cap = public.node_capacity();
    demand.iter().map(|d| d.clamp(0.0, cap)).collect()
}

/// Gas market's estimate of its own objective and prices at a commitment,
/// from the released demand. Falls back to the clipped demand.
pub fn predict_follower_view(
    commitment: &[bool],
    public: &PublicMarket,
    obf: &ObfuscatedDemand,
    cfg: &PredictorConfig,
    rng: &mut SeededRng,
    tol: &Tolerances,
) -> Result<FollowerEstimates, PredictionError> {
    check(cfg)?;
    let chain = match solve_follower_chain(public, commitment, obf.values(), tol) {
        Ok(c) => c,
        Err(MarketError::StageInfeasible(_)) => {
            match solve_follower_chain(public, commitment, &clip_demand(public, obf.values()), tol) {
                Ok(c) => c,
                Err(MarketError::StageInfeasible(_)) => return Err(PredictionError::ChainInfeasible),
                Err(e) => return Err(e.into()),
            }
        }
        Err(e) => return Err(e.into()),
    };
    Ok(FollowerEstimates {
        objective: perturb_scalar(chain.gm.objective, cfg.noise_fraction, rng),
        duals: perturb(chain.gas_prices(), cfg.noise_fraction, rng),
    })
}

/// Gas market's estimate at a commitment from its published outcomes.
pub fn predict_follower_view_released(
    commitment: &[bool],
    released: &ReleasedOutcomes,
    cfg: &PredictorConfig,
    rng: &mut SeededRng,
) -> Result<FollowerEstimates, PredictionError> {
    check(cfg)?;
    let (obj, y) = released.at(commitment).ok_or(PredictionError::ChainInfeasible)?;
    Ok(FollowerEstimates {
        objective: perturb_scalar(*obj, cfg.noise_fraction, rng),
        duals: perturb(y, cfg.noise_fraction, rng),
    })
}
