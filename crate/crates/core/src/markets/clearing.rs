use super::instance::PublicMarket;
use super::MarketError;
use crate::lp::{
    solve_lp, solve_mbp, BnbSettings, LinearProgram, LpError, LpNodeSolver, LpSolution, LpStatus,
    MixedBinaryProgram, Tolerances,
};

/// Market stage that failed to clear.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Electricity,
    Gas,
}

/// Electricity then gas clearing for a fixed commitment.
#[derive(Clone, Debug, PartialEq)]
pub struct FollowerChain {
    pub em: LpSolution,
    pub gm: LpSolution,
    /// Gas burned by GFPPs per node and period.
    pub burn: Vec<f64>,
}

impl FollowerChain {
    /// Gas prices: the duals of the nodal balance rows.
    pub fn gas_prices(&self) -> &[f64] {
        &self.gm.eq_duals
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackelbergSolution {
    pub commitment: Vec<bool>,
    pub em_solution: LpSolution,
    pub gm_solution: LpSolution,
    pub burn: Vec<f64>,
    pub leader_objective: f64,
    pub em_objective: f64,
    pub gm_objective: f64,
}

impl StackelbergSolution {
    pub fn gas_prices(&self) -> &[f64] {
        &self.gm_solution.eq_duals
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderDecision {
    pub commitment: Vec<bool>,
    pub objective: f64,
}

fn pvar(p: &PublicMarket, g: usize, t: usize) -> usize {
    t * p.dims.n_gen + g
}

fn check_len(expected: usize, found: usize) -> Result<(), MarketError> {
    if expected == found {
        Ok(())
    } else {
        Err(MarketError::DimensionMismatch { expected, found })
    }
}

/// Adds bus balance and ramp rows over dispatch columns starting at `off`.
fn add_network_rows(p: &PublicMarket, lp: &mut LinearProgram, off: usize) {
    let d = &p.dims;
    let n = lp.num_vars();
    let fvar = |l: usize, t: usize| off + d.n_gen * d.n_periods + t * d.n_lines + l;
    for t in 0..d.n_periods {
        for b in 0..d.n_buses {
            let mut row = vec![0.0; n];
            for g in (0..d.n_gen).filter(|&g| p.gen_bus[g] == b) {
                row[off + pvar(p, g, t)] = 1.0;
            }
            for l in 0..d.n_lines {
                if p.line_from[l] == b {
                    row[fvar(l, t)] -= 1.0;
                }
                if p.line_to[l] == b {
                    row[fvar(l, t)] += 1.0;
                }
            }
            lp.add_eq(&row, p.load(b, t));
        }
    }
    for t in 1..d.n_periods {
        for g in 0..d.n_gen {
            let mut row = vec![0.0; n];
            row[off + pvar(p, g, t)] = 1.0;
            row[off + pvar(p, g, t - 1)] = -1.0;
            lp.add_ub(&row, p.gen_ramp[g]);
            lp.add_lb(&row, -p.gen_ramp[g]);
        }
    }
    for t in 0..d.n_periods {
        for l in 0..d.n_lines {
            lp.set_bounds(fvar(l, t), -p.line_cap[l], p.line_cap[l]);
        }
    }
}

fn dispatch_cost(p: &PublicMarket) -> Vec<f64> {
    (0..p.dims.n_periods).flat_map(|_| p.gen_cost.iter().copied()).collect()
}

/// Economic dispatch with commitments fixed: dispatch columns then line flows.
pub fn em_program(p: &PublicMarket, commitment: &[bool]) -> LinearProgram {
    let d = &p.dims;
    let mut obj = dispatch_cost(p);
    obj.resize(d.n_periods * (d.n_gen + d.n_lines), 0.0);
    let mut lp = LinearProgram::new(obj);
    add_network_rows(p, &mut lp, 0);
    for t in 0..d.n_periods {
        for g in 0..d.n_gen {
            let on = if commitment[g] { 1.0 } else { 0.0 };
            lp.set_bounds(pvar(p, g, t), on * p.gen_pmin[g], on * p.gen_pmax[g]);
        }
    }
    lp
}

/// Gas burned by GFPPs for an EM dispatch, laid out like gas demand.
pub fn gas_burn(p: &PublicMarket, dispatch: &[f64]) -> Vec<f64> {
    let d = &p.dims;
    let mut burn = vec![0.0; d.gas_len()];
    for t in 0..d.n_periods {
        for k in 0..d.n_gfpp {
            burn[t * d.n_gas_nodes + p.gfpp_node[k]] += p.heat_rate[k] * dispatch[pvar(p, p.gfpp_gen(k), t)];
        }
    }
    burn
}

/// Gas market with balance rows `supply + inflow − outflow = rhs`, one per
/// node and period in gas-vector order. Supply columns come first, then pipe flows.
pub fn gm_program(p: &PublicMarket, rhs: &[f64]) -> LinearProgram {
    let d = &p.dims;
    let ns = d.n_suppliers * d.n_periods;
    let mut obj: Vec<f64> = (0..d.n_periods).flat_map(|_| p.supplier_cost.iter().copied()).collect();
    obj.resize(ns + d.n_pipes * d.n_periods, 0.0);
    let n = obj.len();
    let mut lp = LinearProgram::new(obj);
    let svar = |k: usize, t: usize| t * d.n_suppliers + k;
    let fvar = |e: usize, t: usize| ns + t * d.n_pipes + e;
    for t in 0..d.n_periods {
        for node in 0..d.n_gas_nodes {
            let mut row = vec![0.0; n];
            for k in (0..d.n_suppliers).filter(|&k| p.supplier_node[k] == node) {
                row[svar(k, t)] = 1.0;
            }
            for e in 0..d.n_pipes {
                if p.pipe_from[e] == node {
                    row[fvar(e, t)] -= 1.0;
                }
                if p.pipe_to[e] == node {
                    row[fvar(e, t)] += 1.0;
                }
            }
            lp.add_eq(&row, rhs[t * d.n_gas_nodes + node]);
        }
        for k in 0..d.n_suppliers {
            lp.set_bounds(svar(k, t), 0.0, p.supplier_cap[k]);
        }
        for e in 0..d.n_pipes {
            lp.set_bounds(fvar(e, t), -p.pipe_cap[e], p.pipe_cap[e]);
        }
    }
    lp
}

/// Demand plus GFPP burn: the right-hand side of the gas balance rows.
pub fn gm_rhs(demand: &[f64], burn: &[f64]) -> Vec<f64> {
    demand.iter().zip(burn).map(|(a, b)| a + b).collect()
}

/// Clears the electricity market at `commitment`, then the gas market with
/// `demand` plus the resulting GFPP burn.
pub fn solve_follower_chain(
    p: &PublicMarket,
    commitment: &[bool],
    demand: &[f64],
    tol: &Tolerances,
) -> Result<FollowerChain, MarketError> {
    check_len(p.dims.n_gen, commitment.len())?;
    check_len(p.dims.gas_len(), demand.len())?;
    let em = solve_lp(&em_program(p, commitment), tol)?;
    if em.status != LpStatus::Optimal {
        return Err(MarketError::StageInfeasible(Stage::Electricity));
    }
    let burn = gas_burn(p, &em.primal);
    let gm = solve_lp(&gm_program(p, &gm_rhs(demand, &burn)), tol)?;
    if gm.status != LpStatus::Optimal {
        return Err(MarketError::StageInfeasible(Stage::Gas));
    }
    Ok(FollowerChain { em, gm, burn })
}

/// Whether every committed GFPP's bid is valid at the given gas prices.
pub fn bids_valid(p: &PublicMarket, commitment: &[bool], prices: &[f64], tol: &Tolerances) -> bool {
    let d = &p.dims;
    (0..d.n_gfpp).all(|k| {
        !commitment[p.gfpp_gen(k)]
            || (0..d.n_periods).all(|t| {
                prices[t * d.n_gas_nodes + p.gfpp_node[k]] <= p.breakeven_price[k] + tol.feas_tol * (1.0 + p.breakeven_price[k])
            })
    })
}

fn reserve_ok(p: &PublicMarket, commitment: &[bool]) -> bool {
    let cap: f64 = (0..p.dims.n_gen).filter(|&g| commitment[g]).map(|g| p.gen_pmax[g]).sum();
    (0..p.dims.n_periods).all(|t| cap >= p.reserve_factor * p.total_load(t))
}

/// The leader program at fixed gas prices: commitments, then dispatch and
/// line flows. Bid-validity rows are the last `n_gfpp × n_periods` `≤` rows,
/// ordered by period then GFPP.
pub fn leader_program(p: &PublicMarket, prices: &[f64]) -> LinearProgram {
    let d = &p.dims;
    let ng = d.n_gen;
    let mut obj = p.commit_cost.clone();
    obj.extend(dispatch_cost(p));
    obj.resize(ng + d.n_periods * (ng + d.n_lines), 0.0);
    let n = obj.len();
    let mut lp = LinearProgram::new(obj);
    add_network_rows(p, &mut lp, ng);
    for t in 0..d.n_periods {
        for g in 0..ng {
            let mut row = vec![0.0; n];
            row[ng + pvar(p, g, t)] = 1.0;
            row[g] = -p.gen_pmax[g];
            lp.add_ub(&row, 0.0);
            row[g] = -p.gen_pmin[g];
            lp.add_lb(&row, 0.0);
        }
        let mut row = vec![0.0; n];
        for g in 0..ng {
            row[g] = p.gen_pmax[g];
        }
        lp.add_lb(&row, p.reserve_factor * p.total_load(t));
    }
    for g in 0..ng {
        lp.set_bounds(g, 0.0, 1.0);
    }
    for t in 0..d.n_periods {
        for k in 0..d.n_gfpp {
            // y ≤ π + M(1 − x)  ⇔  M·x ≤ π + M − y
            let mut row = vec![0.0; n];
            row[p.gfpp_gen(k)] = p.validity_m;
            let y = prices[t * d.n_gas_nodes + p.gfpp_node[k]];
            lp.add_ub(&row, (p.breakeven_price[k] + p.validity_m - y).max(0.0));
        }
    }
    lp
}

/// Leader subproblem with gas prices fixed at estimates, solved to integrality.
pub fn solve_leader_given_duals(
    p: &PublicMarket,
    prices: &[f64],
    settings: &BnbSettings,
) -> Result<LeaderDecision, MarketError> {
    check_len(p.dims.gas_len(), prices.len())?;
    let mbp = MixedBinaryProgram::linear(leader_program(p, prices), (0..p.dims.n_gen).collect());
    let s = solve_mbp(&mbp, &LpNodeSolver, settings).map_err(|e| match e {
        LpError::Infeasible => MarketError::Infeasible,
        e => e.into(),
    })?;
    Ok(LeaderDecision {
        commitment: s.x[..p.dims.n_gen].iter().map(|&v| v > 0.5).collect(),
        objective: s.objective,
    })
}

pub const MAX_ENUMERATED_COMMITMENTS: usize = 16;

/// Commitment vectors in lexicographic order, first generator most significant.
pub fn commitments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << n).map(move |v| (0..n).map(|j| (v >> (n - 1 - j)) & 1 == 1).collect())
}

/// Exact bilevel optimum by commitment enumeration.
pub fn solve_full_stackelberg(
    p: &PublicMarket,
    demand: &[f64],
    tol: &Tolerances,
) -> Result<StackelbergSolution, MarketError> {
    let n = p.dims.n_gen;
    if n > MAX_ENUMERATED_COMMITMENTS {
        return Err(MarketError::TooManyCommitments(n));
    }
    check_len(p.dims.gas_len(), demand.len())?;
    let mut best: Option<StackelbergSolution> = None;
    for x in commitments(n) {
        if !reserve_ok(p, &x) {
            continue;
        }
        let chain = match solve_follower_chain(p, &x, demand, tol) {
            Ok(c) => c,
            Err(MarketError::StageInfeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        if !bids_valid(p, &x, chain.gas_prices(), tol) {
            continue;
        }
        let uc: f64 = (0..n).filter(|&g| x[g]).map(|g| p.commit_cost[g]).sum();
        let leader = uc + chain.em.objective;
        let improves = match &best {
            None => true,
            Some(b) => leader < b.leader_objective - tol.opt_tol * (1.0 + b.leader_objective.abs()),
        };
        if improves {
            best = Some(StackelbergSolution {
                commitment: x,
                leader_objective: leader,
                em_objective: chain.em.objective,
                gm_objective: chain.gm.objective,
                em_solution: chain.em,
                gm_solution: chain.gm,
                burn: chain.burn,
            });
        }
    }
    best.ok_or(MarketError::Infeasible)
}
