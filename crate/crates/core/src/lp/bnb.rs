//! Branch-and-bound over binary variables of a convex program.
//!
//! Best-bound node selection; branching on the lowest-index binary whose
//! relaxation value is fractional. Both rules are deterministic, so identical
//! inputs produce bit-identical results.

use super::qp::{solve_qp, QuadraticProgram};
use super::{solve_lp, LinearProgram, LpError, LpStatus, Matrix, Tolerances};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

const INTEGRALITY_TOL: f64 = 1e-6;

/// A linear or convex-quadratic program with a subset of binary variables.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedBinaryProgram {
    pub lp: LinearProgram,
    /// Optional PSD Hessian; the objective is `½xᵀHx + cᵀx + constant`.
    pub hessian: Option<Matrix>,
    pub constant: f64,
    pub binaries: Vec<usize>,
}

impl MixedBinaryProgram {
    pub fn linear(lp: LinearProgram, binaries: Vec<usize>) -> Self {
        Self {
            lp,
            hessian: None,
            constant: 0.0,
            binaries,
        }
    }

    pub fn validate(&self) -> Result<(), LpError> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        if self.binaries.iter().any(|&b| b >= n) {
            return Err(LpError::Malformed("binary index out of range".into()));
        }
        if let Some(h) = &self.hessian {
            let qp = QuadraticProgram {
                lp: LinearProgram::new(vec![0.0; n]),
                hessian: h.clone(),
                constant: 0.0,
            };
            if !qp.is_psd() {
                return Err(LpError::Malformed("quadratic term is not PSD".into()));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin = self.lp.objective_value(x) + self.constant;
        match &self.hessian {
            Some(h) => lin + 0.5 * super::matrix::dot(x, &h.mul_vec(x)),
            None => lin,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Solves the continuous relaxation at a branch-and-bound node.
pub trait NodeSolver {
    fn solve_node(
        &self,
        lp: &LinearProgram,
        hessian: Option<&Matrix>,
        constant: f64,
        tol: &Tolerances,
    ) -> Result<NodeOutcome, LpError>;
}

/// Simplex relaxations; rejects quadratic objectives.
#[derive(Clone, Copy, Debug, Default)]
pub struct LpNodeSolver;

impl NodeSolver for LpNodeSolver {
    fn solve_node(
        &self,
        lp: &LinearProgram,
        hessian: Option<&Matrix>,
        constant: f64,
        tol: &Tolerances,
    ) -> Result<NodeOutcome, LpError> {
        if hessian.is_some() {
            return Err(LpError::Malformed("LP node solver given a quadratic objective".into()));
        }
        let s = solve_lp(lp, tol)?;
        Ok(NodeOutcome {
            status: s.status,
            objective: s.objective + constant,
            x: s.primal,
        })
    }
}

/// Active-set QP relaxations, falling back to simplex when there is no quadratic term.
#[derive(Clone, Copy, Debug, Default)]
pub struct QpNodeSolver;

impl NodeSolver for QpNodeSolver {
    fn solve_node(
        &self,
        lp: &LinearProgram,
        hessian: Option<&Matrix>,
        constant: f64,
        tol: &Tolerances,
    ) -> Result<NodeOutcome, LpError> {
        match hessian {
            None => LpNodeSolver.solve_node(lp, None, constant, tol),
            Some(h) => {
                let qp = QuadraticProgram {
                    lp: lp.clone(),
                    hessian: h.clone(),
                    constant,
                };
                let s = solve_qp(&qp, tol)?;
                Ok(NodeOutcome {
                    status: s.status,
                    x: s.x,
                    objective: s.objective,
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BnbSettings {
    pub tol: Tolerances,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for BnbSettings {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            node_limit: 200_000,
            time_limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MbpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
}

struct Node {
    bound: f64,
    seq: usize,
    fixed: Vec<Option<bool>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Global optimum of a mixed-binary convex program by branch-and-bound.
pub fn solve_mbp<S: NodeSolver + ?Sized>(
    p: &MixedBinaryProgram,
    node_solver: &S,
    settings: &BnbSettings,
) -> Result<MbpSolution, LpError> {
    p.validate()?;
    let started = Instant::now();
    let tol = &settings.tol;
    let nb = p.binaries.len();
    let mut relax = p.lp.clone();
    for &j in &p.binaries {
        relax.lower[j] = relax.lower[j].max(0.0);
        relax.upper[j] = relax.upper[j].min(1.0);
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        fixed: vec![None; nb],
    });
    let mut seq = 1usize;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes = 0usize;

    while let Some(node) = heap.pop() {
        if let Some((_, best)) = &incumbent {
            if node.bound >= best - tol.opt_tol * (1.0 + best.abs()) {
                break;
            }
        }
        if nodes >= settings.node_limit {
            return Err(LpError::NodeLimitExceeded(settings.node_limit));
        }
        if let Some(limit) = settings.time_limit {
            if started.elapsed() > limit {
                return Err(LpError::TimeLimitExceeded);
            }
        }
        nodes += 1;

        let mut lp = relax.clone();
        for (k, f) in node.fixed.iter().enumerate() {
            if let Some(v) = f {
                let j = p.binaries[k];
                let v = if *v { 1.0 } else { 0.0 };
                lp.lower[j] = v;
                lp.upper[j] = v;
            }
        }
        let out = node_solver.solve_node(&lp, p.hessian.as_ref(), p.constant, tol)?;
        match out.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(LpError::Unbounded),
            LpStatus::Optimal => {}
        }
        if let Some((_, best)) = &incumbent {
            if out.objective >= best - tol.opt_tol * (1.0 + best.abs()) {
                continue;
            }
        }
        let fractional = p.binaries.iter().position(|&j| {
            let v = out.x[j];
            (v - v.round()).abs() > INTEGRALITY_TOL
        });
        match fractional {
            None => {
                let mut x = out.x;
                for &j in &p.binaries {
                    x[j] = x[j].round();
                }
                incumbent = Some((x, out.objective));
            }
            Some(k) => {
                for v in [false, true] {
                    let mut fixed = node.fixed.clone();
                    fixed[k] = Some(v);
                    heap.push(Node {
                        bound: out.objective,
                        seq,
                        fixed,
                    });
                    seq += 1;
                }
            }
        }
    }

    match incumbent {
        Some((x, objective)) => Ok(MbpSolution { x, objective, nodes }),
        None => Err(LpError::Infeasible),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_binaries_match_plain_solve() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0, -1.0]);
        lp.set_bounds(0, 1.0, 1.0);
        lp.set_bounds(1, 0.0, 0.0);
        lp.set_bounds(2, 0.0, 4.0);
        lp.add_ub(&[1.0, 1.0, 1.0], 3.0);
        let p = MixedBinaryProgram::linear(lp.clone(), vec![0, 1]);
        let s = solve_mbp(&p, &LpNodeSolver, &BnbSettings::default()).unwrap();
        let direct = solve_lp(&lp, &Tolerances::default()).unwrap();
        assert_eq!(s.nodes, 1);
        assert!((s.objective - direct.objective).abs() < 1e-12);
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c ≤ 4 → min of negatives
        let values = [5.0, 4.0, 3.0];
        let weights = [2.0, 3.0, 1.0];
        let mut lp = LinearProgram::new(values.iter().map(|v| -v).collect());
        lp.add_ub(&weights, 4.0);
        for j in 0..3 {
            lp.set_bounds(j, 0.0, 1.0);
        }
        let p = MixedBinaryProgram::linear(lp, vec![0, 1, 2]);
        let s = solve_mbp(&p, &LpNodeSolver, &BnbSettings::default()).unwrap();
        let mut best = 0.0f64;
        for mask in 0..8u32 {
            let pick = |j: usize| ((mask >> j) & 1) as f64;
            let w: f64 = (0..3).map(|j| weights[j] * pick(j)).sum();
            if w <= 4.0 {
                best = best.min(-(0..3).map(|j| values[j] * pick(j)).sum::<f64>());
            }
        }
        assert!((s.objective - best).abs() < 1e-9);
        assert_eq!(best, -8.0);
    }

    #[test]
    fn infeasible_integer_program() {
        // a + b = 1.5 with a, b binary
        let mut lp = LinearProgram::new(vec![0.0, 0.0]);
        lp.add_eq(&[1.0, 1.0], 1.5);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        let p = MixedBinaryProgram::linear(lp, vec![0, 1]);
        assert_eq!(
            solve_mbp(&p, &LpNodeSolver, &BnbSettings::default()).unwrap_err(),
            LpError::Infeasible
        );
    }

    #[test]
    fn node_limit_is_reported() {
        let n = 6;
        let mut lp = LinearProgram::new(vec![-1.0; n]);
        lp.add_ub(&vec![2.0; n], 5.0);
        for j in 0..n {
            lp.set_bounds(j, 0.0, 1.0);
        }
        let p = MixedBinaryProgram::linear(lp, (0..n).collect());
        let settings = BnbSettings {
            node_limit: 2,
            ..Default::default()
        };
        assert_eq!(
            solve_mbp(&p, &LpNodeSolver, &settings).unwrap_err(),
            LpError::NodeLimitExceeded(2)
        );
    }
}
