use super::*;
use crate::lp::{verify_kkt, BnbSettings, Matrix, Tolerances};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn desk(seed: u64) -> MarketInstance {
    generate_instance(6, 3, 6, 1, 1.0, 1.0, seed).unwrap()
}

/// One generator (gas-fired), one bus, one gas node, one supplier.
fn toy_single() -> PublicMarket {
    PublicMarket {
        dims: Dims {
            n_gen: 1,
            n_gfpp: 1,
            n_buses: 1,
            n_lines: 0,
            n_gas_nodes: 1,
            n_suppliers: 1,
            n_pipes: 0,
            n_periods: 1,
        },
        stress_e: 1.0,
        stress_g: 1.0,
        commit_cost: vec![100.0],
        reserve_factor: 1.0,
        gen_bus: vec![0],
        gen_pmin: vec![10.0],
        gen_pmax: vec![100.0],
        gen_cost: vec![30.0],
        gen_ramp: vec![50.0],
        bus_load: Matrix::from_rows(1, &[vec![40.0]]),
        line_from: vec![],
        line_to: vec![],
        line_cap: vec![],
        gfpp_node: vec![0],
        heat_rate: vec![2.0],
        breakeven_price: vec![15.0],
        validity_m: 1000.0,
        supplier_node: vec![0],
        supplier_cap: vec![500.0],
        supplier_cost: vec![12.0],
        pipe_from: vec![],
        pipe_to: vec![],
        pipe_cap: vec![],
    }
}

/// Two generators on one bus: a cheap GFPP and a dearer non-gas unit.
/// Gas comes from a cheap capped supplier and a dear one above breakeven.
fn toy_pair() -> PublicMarket {
    let mut p = toy_single();
    p.dims.n_gen = 2;
    p.dims.n_suppliers = 2;
    p.commit_cost = vec![200.0, 100.0];
    p.gen_bus = vec![0, 0];
    p.gen_pmin = vec![0.0, 0.0];
    p.gen_pmax = vec![100.0, 100.0];
    p.gen_cost = vec![50.0, 30.0];
    p.gen_ramp = vec![50.0, 50.0];
    p.supplier_node = vec![0, 0];
    p.supplier_cap = vec![100.0, 1000.0];
    p.supplier_cost = vec![12.0, 18.0];
    p
}

#[test]
fn same_seed_gives_identical_instances() {
    let a = desk(7);
    let b = desk(7);
    assert_eq!(a.to_text(), b.to_text());
    assert_ne!(a.to_text(), desk(8).to_text());
}

#[test]
fn generated_instance_is_feasible_and_well_formed() {
    for seed in 0..10 {
        let inst = desk(seed);
        inst.public.validate().unwrap();
        assert!(inst.sensitive.values().iter().all(|&d| d >= 0.0));
        solve_full_stackelberg(&inst.public, inst.sensitive.values(), &tol()).unwrap();
        assert_eq!(inst.public.dims.n_pipes, inst.public.dims.n_gas_nodes);
    }
}

#[test]
fn instance_text_round_trip_is_bit_exact() {
    let inst = generate_instance(5, 2, 7, 2, 1.2, 1.9, 3).unwrap();
    let back = MarketInstance::from_text(&inst.to_text()).unwrap();
    assert_eq!(back, inst);
}

#[test]
fn zero_gas_stress_leaves_only_gfpp_burn() {
    for seed in 0..5 {
        let inst = generate_instance(6, 3, 6, 1, 1.0, 0.0, seed).unwrap();
        assert!(inst.sensitive.values().iter().all(|&d| d == 0.0));
        let p = &inst.public;
        let x = vec![true; p.dims.n_gen];
        let chain = solve_follower_chain(p, &x, inst.sensitive.values(), &tol()).unwrap();
        let burn: f64 = chain.burn.iter().sum();
        // serving only burn: merit order over suppliers is the analytic optimum
        // when pipes do not bind, which the per-node check below confirms
        let served: f64 = chain.gm.primal[..p.dims.n_suppliers].iter().sum();
        assert!((served - burn).abs() < 1e-6);
        let cost: f64 = chain.gm.primal[..p.dims.n_suppliers]
            .iter()
            .zip(&p.supplier_cost)
            .map(|(s, c)| s * c)
            .sum();
        assert!((cost - chain.gm.objective).abs() < 1e-6);
    }
}

#[test]
fn hardest_stress_cell_stays_well_formed() {
    for seed in 0..5 {
        let inst = generate_instance(6, 3, 6, 1, 1.3, 2.3, seed).unwrap();
        inst.public.validate().unwrap();
        let _ = solve_full_stackelberg(&inst.public, inst.sensitive.values(), &tol());
    }
}

#[test]
fn empty_commitment_with_zero_demand_clears() {
    let mut p = toy_single();
    p.bus_load = Matrix::from_rows(1, &[vec![0.0]]);
    let chain = solve_follower_chain(&p, &[false], &[0.0], &tol()).unwrap();
    assert_eq!(chain.em.primal[0], 0.0);
    assert_eq!(chain.gm.objective, 0.0);
}

#[test]
fn single_gfpp_toy_matches_hand_merit_order() {
    // 40 MWh at heat rate 2 burns 80; demand 100 → 180 at 12 $/MWh
    let p = toy_single();
    let chain = solve_follower_chain(&p, &[true], &[100.0], &tol()).unwrap();
    assert!((chain.em.primal[0] - 40.0).abs() < 1e-9);
    assert!((chain.em.objective - 1200.0).abs() < 1e-9);
    assert!((chain.burn[0] - 80.0).abs() < 1e-9);
    assert!((chain.gm.objective - 2160.0).abs() < 1e-9);
    assert!((chain.gas_prices()[0] - 12.0).abs() < 1e-9);
}

#[test]
fn demand_above_supply_makes_gas_stage_infeasible() {
    let p = toy_single();
    assert_eq!(
        solve_follower_chain(&p, &[true], &[1000.0], &tol()).unwrap_err(),
        MarketError::StageInfeasible(Stage::Gas)
    );
}

#[test]
fn chain_prices_are_the_balance_duals_and_certified() {
    let inst = desk(11);
    let p = &inst.public;
    let s = solve_full_stackelberg(p, inst.sensitive.values(), &tol()).unwrap();
    let chain = solve_follower_chain(p, &s.commitment, inst.sensitive.values(), &tol()).unwrap();
    assert_eq!(chain.gas_prices().as_ptr(), chain.gm.eq_duals.as_ptr());
    assert_eq!(chain.gas_prices(), s.gas_prices());
    let lp = gm_program(p, &gm_rhs(inst.sensitive.values(), &chain.burn));
    assert!(verify_kkt(&lp, &chain.gm).max() <= 1e-8);
}

#[test]
fn low_price_estimates_leave_commitment_unconstrained() {
    let inst = desk(2);
    let p = &inst.public;
    let low = vec![0.0; p.dims.gas_len()];
    let huge_m = {
        let mut q = p.clone();
        q.gfpp_node.clear();
        q.heat_rate.clear();
        q.breakeven_price.clear();
        q.dims.n_gfpp = 0;
        q
    };
    let a = solve_leader_given_duals(p, &low, &BnbSettings::default()).unwrap();
    let b = solve_leader_given_duals(&huge_m, &low, &BnbSettings::default()).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-6);
}

#[test]
fn huge_price_estimates_switch_gfpps_off() {
    let inst = desk(2);
    let p = &inst.public;
    let high = vec![1e9; p.dims.gas_len()];
    match solve_leader_given_duals(p, &high, &BnbSettings::default()) {
        Ok(d) => {
            for k in 0..p.dims.n_gfpp {
                assert!(!d.commitment[p.gfpp_gen(k)]);
            }
        }
        Err(e) => assert_eq!(e, MarketError::Infeasible),
    }
}

#[test]
fn two_generator_leader_matches_enumeration() {
    let p = toy_pair();
    for y in [10.0, 15.0, 16.0, 30.0] {
        let d = solve_leader_given_duals(&p, &[y], &BnbSettings::default()).unwrap();
        let mut best = f64::INFINITY;
        for x in commitments(2) {
            if x[1] && y > p.breakeven_price[0] {
                continue;
            }
            let cap: f64 = (0..2).filter(|&g| x[g]).map(|g| p.gen_pmax[g]).sum();
            if cap < 40.0 {
                continue;
            }
            let Ok(chain) = solve_follower_chain(&p, &x, &[0.0], &tol()) else {
                continue;
            };
            let uc: f64 = (0..2).filter(|&g| x[g]).map(|g| p.commit_cost[g]).sum();
            best = best.min(uc + chain.em.objective);
        }
        assert!((d.objective - best).abs() < 1e-6, "y = {y}");
    }
}

#[test]
fn forced_single_commitment_equals_chain_evaluation() {
    let mut p = toy_single();
    p.reserve_factor = 1.0;
    let s = solve_full_stackelberg(&p, &[50.0], &tol()).unwrap();
    let chain = solve_follower_chain(&p, &[true], &[50.0], &tol()).unwrap();
    assert_eq!(s.commitment, vec![true]);
    assert_eq!(s.em_objective, chain.em.objective);
    assert_eq!(s.gm_objective, chain.gm.objective);
    assert_eq!(s.leader_objective, 100.0 + chain.em.objective);
}

/// Independent enumeration with its own loop order, used as a cross-check.
fn brute_force(p: &PublicMarket, demand: &[f64]) -> Option<(Vec<bool>, f64)> {
    let n = p.dims.n_gen;
    let mut all: Vec<(Vec<bool>, f64)> = Vec::new();
    for mask in (0..1u32 << n).rev() {
        let x: Vec<bool> = (0..n).map(|j| mask & (1 << (n - 1 - j)) != 0).collect();
        let cap: f64 = (0..n).filter(|&g| x[g]).map(|g| p.gen_pmax[g]).sum();
        if (0..p.dims.n_periods).any(|t| cap < p.reserve_factor * p.total_load(t)) {
            continue;
        }
        let Ok(c) = solve_follower_chain(p, &x, demand, &tol()) else {
            continue;
        };
        if !bids_valid(p, &x, c.gas_prices(), &tol()) {
            continue;
        }
        let obj = (0..n).filter(|&g| x[g]).map(|g| p.commit_cost[g]).sum::<f64>() + c.em.objective;
        all.push((x, obj));
    }
    let best = all.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
    all.into_iter()
        .filter(|a| a.1 <= best + 1e-9 * (1.0 + best.abs()))
        .min_by(|a, b| a.0.cmp(&b.0))
}

#[test]
fn three_binary_stackelberg_matches_brute_force() {
    for seed in 0..20 {
        let inst = generate_instance(3, 2, 4, 1, 1.0, 1.0, seed).unwrap();
        let p = &inst.public;
        let d = inst.sensitive.values();
        let s = solve_full_stackelberg(p, d, &tol()).unwrap();
        let (x, obj) = brute_force(p, d).unwrap();
        assert_eq!(s.commitment, x, "seed {seed}");
        assert!((s.leader_objective - obj).abs() < 1e-9);
    }
}

#[test]
fn bid_validity_holds_at_equilibrium() {
    for seed in 0..10 {
        let inst = desk(seed);
        let p = &inst.public;
        let s = solve_full_stackelberg(p, inst.sensitive.values(), &tol()).unwrap();
        for k in 0..p.dims.n_gfpp {
            let y = s.gas_prices()[p.gfpp_node[k]];
            let x = if s.commitment[p.gfpp_gen(k)] { 1.0 } else { 0.0 };
            assert!(y <= p.breakeven_price[k] + p.validity_m * (1.0 - x) + 1e-8);
        }
    }
}

#[test]
fn multi_period_ramps_are_respected() {
    let inst = generate_instance(4, 2, 4, 3, 1.0, 1.0, 5).unwrap();
    let p = &inst.public;
    let s = solve_full_stackelberg(p, inst.sensitive.values(), &tol()).unwrap();
    let ng = p.dims.n_gen;
    for t in 1..3 {
        for g in 0..ng {
            let dp = s.em_solution.primal[t * ng + g] - s.em_solution.primal[(t - 1) * ng + g];
            assert!(dp.abs() <= p.gen_ramp[g] + 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stackelberg_beats_sampled_feasible_pairs(seed in 0u64..500, picks in prop::collection::vec(any::<u32>(), 8)) {
        let inst = desk(seed);
        let p = &inst.public;
        let d = inst.sensitive.values();
        let s = solve_full_stackelberg(p, d, &tol()).unwrap();
        for m in picks {
            let x: Vec<bool> = (0..p.dims.n_gen).map(|j| (m >> j) & 1 == 1).collect();
            let cap: f64 = (0..p.dims.n_gen).filter(|&g| x[g]).map(|g| p.gen_pmax[g]).sum();
            if cap < p.reserve_factor * p.total_load(0) {
                continue;
            }
            if let Ok(c) = solve_follower_chain(p, &x, d, &tol()) {
                if bids_valid(p, &x, c.gas_prices(), &tol()) {
                    let obj = (0..p.dims.n_gen).filter(|&g| x[g]).map(|g| p.commit_cost[g]).sum::<f64>() + c.em.objective;
                    prop_assert!(s.leader_objective <= obj + 1e-9 * (1.0 + obj.abs()));
                }
            }
        }
    }

    #[test]
    fn gas_cost_is_monotone_in_gas_stress(seed in 0u64..200, lo in 0.5f64..1.5, step in 0.0f64..1.0) {
        let a = generate_instance(6, 3, 6, 1, 1.0, lo, seed).unwrap();
        let b = generate_instance(6, 3, 6, 1, 1.0, lo + step, seed).unwrap();
        let x = vec![true; 6];
        if let (Ok(ca), Ok(cb)) = (
            solve_follower_chain(&a.public, &x, a.sensitive.values(), &tol()),
            solve_follower_chain(&b.public, &x, b.sensitive.values(), &tol()),
        ) {
            prop_assert!(cb.gm.objective >= ca.gm.objective - 1e-9);
        }
    }
}

#[test]
fn random_demand_perturbations_keep_solver_consistent() {
    let inst = desk(4);
    let p = &inst.public;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let d: Vec<f64> = inst.sensitive.values().iter().map(|v| v + rng.random_range(-50.0..50.0)).collect();
        if let Ok(s) = solve_full_stackelberg(p, &d, &tol()) {
            assert!(bids_valid(p, &s.commitment, s.gas_prices(), &tol()));
        }
    }
}
