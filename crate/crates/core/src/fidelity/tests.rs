use super::*;
use crate::lp::{solve_mbp, BnbSettings, QpNodeSolver};
use crate::markets::{generate_instance, solve_follower_chain, solve_full_stackelberg, MarketInstance};
use crate::privacy::{obfuscate, PrivacyParams};
use crate::rng::SeededRng;

fn cfg() -> FidelityConfig {
    FidelityConfig::default()
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// min c·x s.t. x − s = θ, x, s ≥ 0: at θ = d ≥ 0 the optimum is x = d with price c.
fn one_var(c: f64) -> (LinearProgram, Matrix) {
    let mut lp = LinearProgram::new(vec![c, 0.0]);
    lp.add_eq(&[1.0, -1.0], 0.0);
    (lp, Matrix::from_rows(1, &[vec![1.0]]))
}

#[test]
fn hand_kkt_of_one_variable_program() {
    let (lp, p) = one_var(3.0);
    let b = BandedKkt::new(&lp, p, vec![5.0], 15.0, 1e9, None);
    let r = b.enumerate(&cfg()).unwrap();
    assert_eq!(r.status, FidelityStatus::Optimal);
    assert!((r.d_hat[0] - 5.0).abs() < 1e-9);
    assert!((r.follower_primal[0] - 5.0).abs() < 1e-9);
    assert!((r.follower_duals[0] - 3.0).abs() < 1e-9);
}

#[test]
fn pair_count_matches_inequalities_and_bounds() {
    let mut lp = LinearProgram::new(vec![1.0, 2.0, 0.0]);
    lp.add_ub(&[1.0, 1.0, 0.0], 4.0);
    lp.add_eq(&[1.0, 0.0, 1.0], 1.0);
    lp.set_bounds(1, 0.0, 3.0);
    lp.set_bounds(2, f64::NEG_INFINITY, f64::INFINITY);
    let k = build_kkt(&lp, &Matrix::zeros(1, 0));
    // one ≤ row, lower bounds on x0 and x1, upper bound on x1
    assert_eq!(k.pairs.len(), 1 + 2 + 1);
}

fn toy(seed: u64) -> MarketInstance {
    generate_instance(2, 1, 3, 1, 1.0, 1.0, seed).unwrap()
}

/// Ground-truth point of the KKT system at the true demand.
fn truth_point(inst: &MarketInstance) -> (KktSystem, Vec<f64>) {
    let p = &inst.public;
    let d = inst.sensitive.values();
    let s = solve_full_stackelberg(p, d, &tol()).unwrap();
    let lower = gm_program(p, &s.burn);
    let n = d.len();
    let mut id = Matrix::zeros(n, n);
    for i in 0..n {
        id.set(i, i, 1.0);
    }
    let k = build_kkt(&lower, &id);
    let mut v = vec![0.0; k.num_vars()];
    for (i, di) in d.iter().enumerate() {
        v[k.theta(i)] = *di;
    }
    let g = &s.gm_solution;
    for (j, x) in g.primal.iter().enumerate() {
        v[k.x(j)] = *x;
    }
    for (i, y) in g.eq_duals.iter().enumerate() {
        v[k.lambda(i)] = *y;
    }
    for (q, &j) in k.lower_ix.iter().enumerate() {
        v[k.z_lo(q)] = g.lower_duals[j];
    }
    for (q, &j) in k.upper_ix.iter().enumerate() {
        v[k.z_up(q)] = g.upper_duals[j];
    }
    (k, v)
}

#[test]
fn ground_truth_satisfies_kkt_rows() {
    for seed in 0..10 {
        let inst = generate_instance(6, 3, 6, 1, 1.0, 1.5, seed).unwrap();
        let (k, v) = truth_point(&inst);
        let c = &k.constraints;
        for (row, b) in c.eq_matrix.rows().zip(&c.eq_rhs) {
            let r: f64 = row.iter().zip(&v).map(|(a, x)| a * x).sum();
            assert!((r - b).abs() <= 1e-8, "seed {seed}: eq residual {}", r - b);
        }
        for (j, x) in v.iter().enumerate() {
            assert!(*x >= c.lower[j] - 1e-8 && *x <= c.upper[j] + 1e-8);
        }
        for pair in &k.pairs {
            assert!((pair.slack(&v) * v[pair.dual]).abs() <= 1e-8);
        }
    }
}

#[test]
fn forced_binaries_switch_the_pair() {
    let (lp, p) = one_var(3.0);
    let b = BandedKkt::new(&lp, p, vec![5.0], 15.0, 1e9, None);
    let (mp, md) = b.initial_big_m();
    let nv = b.kkt.num_vars();
    for (i, pair) in b.kkt.pairs.iter().enumerate() {
        for z in [0.0, 1.0] {
            let mut mbp = big_m_linearize(&b.kkt, &b.target, &mp, &md);
            mbp.lp.set_bounds(nv + i, z, z);
            if let Ok(s) = solve_mbp(&mbp, &QpNodeSolver, &BnbSettings::default()) {
                if z == 1.0 {
                    assert!(pair.slack(&s.x).abs() < 1e-9);
                } else {
                    assert!(s.x[pair.dual].abs() < 1e-9);
                }
            }
        }
    }
}

fn problem(inst: &MarketInstance, alpha: f64, pct: f64, variant: Variant, seed: u64) -> Option<FidelityProblem> {
    let p = &inst.public;
    let s = solve_full_stackelberg(p, inst.sensitive.values(), &tol()).ok()?;
    let obf = obfuscate(&inst.sensitive, &PrivacyParams::with_alpha(alpha).unwrap(), &mut SeededRng::new(seed));
    let estimates = FollowerEstimates {
        objective: s.gm_objective,
        duals: s.gas_prices().to_vec(),
    };
    let (eta_p, eta_d) = eta_from_pct(pct, &estimates);
    Some(FidelityProblem {
        obf,
        commitment: s.commitment.clone(),
        estimates,
        eta_p,
        eta_d,
        variant,
    })
}

#[test]
fn exact_release_is_its_own_projection() {
    let inst = toy(1);
    let fp = problem(&inst, 1e-12, 0.0, Variant::Ppsm, 0).unwrap();
    let r = solve_fidelity(&fp, &inst.public, &cfg()).unwrap();
    assert_eq!(r.status, FidelityStatus::Optimal);
    assert!(r.distance < 1e-9);
    for (a, b) in r.d_hat.iter().zip(inst.sensitive.values()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn wide_bands_keep_a_feasible_release() {
    let inst = toy(2);
    let mut fp = problem(&inst, 20.0, 0.0, Variant::Ppsm, 3).unwrap();
    fp.eta_p = 1e12;
    fp.eta_d = 1e6;
    let nonneg = fp.obf.values().iter().all(|v| *v >= 0.0);
    let feasible = solve_follower_chain(&inst.public, &fp.commitment, fp.obf.values(), &tol()).is_ok();
    let r = solve_fidelity(&fp, &inst.public, &cfg()).unwrap();
    assert_eq!(r.status, FidelityStatus::Optimal);
    if nonneg && feasible {
        assert!(r.distance < 1e-8);
    }
}

#[test]
fn branch_and_bound_matches_pattern_oracle_on_toys() {
    for seed in 0..12 {
        let inst = toy(seed);
        for (variant, pct) in [(Variant::Ppsm, 1.0), (Variant::PpsmP, 0.1), (Variant::Ppsm, 10.0)] {
            let fp = problem(&inst, 100.0, pct, variant, seed).unwrap();
            let a = solve_fidelity(&fp, &inst.public, &cfg()).unwrap();
            let b = enumerate_fidelity_oracle(&fp, &inst.public, &cfg()).unwrap();
            assert_eq!(a.status, b.status, "seed {seed}");
            if a.status == FidelityStatus::Optimal {
                assert!((a.distance - b.distance).abs() <= 1e-6 * (1.0 + b.distance), "seed {seed}: {} vs {}", a.distance, b.distance);
                assert!(a.residuals <= 1e-6, "residual {}", a.residuals);
            }
        }
    }
}

#[test]
fn impossible_bands_are_infeasible_in_both_solvers() {
    let inst = toy(3);
    let mut fp = problem(&inst, 10.0, 0.1, Variant::Ppsm, 1).unwrap();
    fp.estimates.objective = -1e6;
    assert_eq!(solve_fidelity(&fp, &inst.public, &cfg()).unwrap().status, FidelityStatus::Infeasible);
    assert_eq!(enumerate_fidelity_oracle(&fp, &inst.public, &cfg()).unwrap().status, FidelityStatus::Infeasible);
}

#[test]
fn dropping_the_dual_band_never_moves_further() {
    for seed in 0..6 {
        let inst = generate_instance(4, 2, 4, 1, 1.0, 1.5, seed).unwrap();
        let Some(a) = problem(&inst, 100.0, 1.0, Variant::Ppsm, seed) else {
            continue;
        };
        let mut b = a.clone();
        b.variant = Variant::PpsmP;
        let ra = solve_fidelity(&a, &inst.public, &cfg()).unwrap();
        let rb = solve_fidelity(&b, &inst.public, &cfg()).unwrap();
        if ra.status == FidelityStatus::Optimal {
            assert_eq!(rb.status, FidelityStatus::Optimal);
            assert!(rb.distance <= ra.distance + 1e-6 * (1.0 + ra.distance));
        }
    }
}

#[test]
fn zero_pairs_is_a_single_qp() {
    let mut lp = LinearProgram::new(vec![0.0]);
    lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
    lp.add_eq(&[1.0], 0.0);
    let b = BandedKkt::new(&lp, Matrix::from_rows(1, &[vec![1.0]]), vec![-2.0], 0.0, 1.0, None);
    assert!(b.kkt.pairs.is_empty());
    let r = b.enumerate(&cfg()).unwrap();
    assert_eq!(r.nodes, 1);
    // θ ≥ 0 projects −2 onto 0
    assert!((r.distance - 4.0).abs() < 1e-9);
}

#[test]
fn laplace_and_oversized_problems_are_rejected() {
    let inst = toy(4);
    let fp = problem(&inst, 10.0, 1.0, Variant::Laplace, 0).unwrap();
    assert_eq!(solve_fidelity(&fp, &inst.public, &cfg()).unwrap_err(), FidelityError::NotApplicable);
    let big = generate_instance(6, 3, 8, 1, 1.0, 1.0, 0).unwrap();
    let fp = problem(&big, 10.0, 1.0, Variant::Ppsm, 0).unwrap();
    assert!(matches!(enumerate_fidelity_oracle(&fp, &big.public, &cfg()), Err(FidelityError::TooLarge(_))));
}

#[test]
fn no_dual_sits_at_its_big_m_cap() {
    let inst = generate_instance(6, 3, 6, 1, 1.0, 1.5, 7).unwrap();
    let fp = problem(&inst, 100.0, 1.0, Variant::Ppsm, 7).unwrap();
    let b = fp.banded_kkt(&inst.public, &tol()).unwrap().unwrap();
    let r = b.solve(&cfg()).unwrap();
    assert_eq!(r.status, FidelityStatus::Optimal);
    let (_, md) = b.initial_big_m();
    for y in r.follower_duals.iter() {
        assert!(y.abs() < (1.0 - 1e-4) * md[0]);
    }
}
