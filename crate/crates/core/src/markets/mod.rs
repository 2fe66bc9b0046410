//! Synthetic gas-aware unit commitment (leader) with sequential electricity
//! and gas market clearings (followers), and the exact Stackelberg oracle.
//!
//! The leader picks binary commitments. The electricity market dispatches the
//! committed units over a transport network. Gas-fired units burn gas at their
//! heat rate, which enters the gas market's nodal balance rows next to the
//! sensitive demand. Gas prices are the duals of those rows, and the leader
//! only accepts a gas-fired unit's bid while the price at its node stays at or
//! below the unit's breakeven price.

mod clearing;
mod generate;
mod instance;

pub use clearing::{
    bids_valid, commitments, em_program, gas_burn, gm_program, gm_rhs, leader_program,
    solve_follower_chain, solve_full_stackelberg, solve_leader_given_duals, FollowerChain,
    LeaderDecision, Stage, StackelbergSolution, MAX_ENUMERATED_COMMITMENTS,
};
pub use generate::{generate, generate_instance, GenerateParams};
pub use instance::{Dims, MarketInstance, PublicMarket, SensitiveDemand, INSTANCE_KIND};

use crate::lp::LpError;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("instance generation failed after {0} repair rounds")]
    GenerationFailed(usize),
    #[error("vector of length {found} where {expected} was expected")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0:?} market stage is infeasible")]
    StageInfeasible(Stage),
    #[error("no commitment yields a feasible, bid-valid clearing")]
    Infeasible,
    #[error("{0} commitment binaries exceed the enumeration cap")]
    TooManyCommitments(usize),
    #[error("invalid generation parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[cfg(test)]
mod tests;
