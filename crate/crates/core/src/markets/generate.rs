use super::clearing::solve_full_stackelberg;
use super::instance::{Dims, MarketInstance, PublicMarket, SensitiveDemand};
use super::MarketError;
use crate::lp::{Matrix, Tolerances};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REPAIR_ROUNDS: usize = 20;
const REPAIR_GROWTH: f64 = 1.25;
/// Gas infrastructure is sized for demand up to this multiple of the base.
const DESIGN_GAS_STRESS: f64 = 2.3;

/// Instance size and stress levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateParams {
    pub n_gen: usize,
    pub n_gfpp: usize,
    pub n_gas_nodes: usize,
    pub n_periods: usize,
    pub stress_e: f64,
    pub stress_g: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            n_gen: 6,
            n_gfpp: 3,
            n_gas_nodes: 6,
            n_periods: 1,
            stress_e: 1.0,
            stress_g: 1.0,
        }
    }
}

/// Random tree on `n` nodes plus one chord that closes a cycle.
fn tree_plus_chord(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    if n >= 3 {
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|e| !edges.contains(e))
            .collect();
        if let Some(&e) = candidates.get(rng.random_range(0..candidates.len().max(1))) {
            edges.push(e);
        }
    }
    edges
}

/// Deterministic synthetic instance. Stress factors scale the electricity load
/// and the sensitive gas demand of the instance built for stress (1, 1).
pub fn generate_instance(
    n_gen: usize,
    n_gfpp: usize,
    n_gas_nodes: usize,
    n_periods: usize,
    stress_e: f64,
    stress_g: f64,
    seed: u64,
) -> Result<MarketInstance, MarketError> {
    let gp = GenerateParams {
        n_gen,
        n_gfpp,
        n_gas_nodes,
        n_periods,
        stress_e,
        stress_g,
    };
    generate(&gp, seed)
}

/// [`generate_instance`] with the parameters in a struct.
pub fn generate(gp: &GenerateParams, seed: u64) -> Result<MarketInstance, MarketError> {
    if gp.n_gen == 0 || gp.n_gas_nodes == 0 || gp.n_periods == 0 {
        return Err(MarketError::BadParams("counts must be at least 1".into()));
    }
    if gp.n_gfpp > gp.n_gen {
        return Err(MarketError::BadParams("more GFPPs than generators".into()));
    }
    if !(gp.stress_e > 0.0) || !(gp.stress_g >= 0.0) {
        return Err(MarketError::BadParams("stress factors must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ng, nk, nn, nt) = (gp.n_gen, gp.n_gfpp, gp.n_gas_nodes, gp.n_periods);
    let n_buses = ng.div_ceil(2);
    let n_suppliers = nn.div_ceil(3);

    let lines = tree_plus_chord(n_buses, &mut rng);
    let pipes = tree_plus_chord(nn, &mut rng);

    let mut supplier_node: Vec<usize> = (0..nn).collect();
    supplier_node.shuffle(&mut rng);
    supplier_node.truncate(n_suppliers);
    supplier_node.sort_unstable();
    let supplier_cost: Vec<f64> = (0..n_suppliers).map(|_| rng.random_range(8.0..20.0)).collect();
    let mean_cost = supplier_cost.iter().sum::<f64>() / n_suppliers as f64;

    let mut gen_pmax = Vec::with_capacity(ng);
    let mut gen_cost = Vec::with_capacity(ng);
    let mut commit_cost = Vec::with_capacity(ng);
    let mut heat_rate = Vec::with_capacity(nk);
    let mut breakeven_price = Vec::with_capacity(nk);
    let mut gfpp_node = Vec::with_capacity(nk);
    for g in 0..ng {
        gen_pmax.push(rng.random_range(60.0..140.0));
        if g < ng - nk {
            gen_cost.push(rng.random_range(40.0..70.0));
            commit_cost.push(rng.random_range(300.0..900.0));
        } else {
            let h = rng.random_range(1.8..2.4);
            let pi = mean_cost * rng.random_range(1.05..1.5);
            heat_rate.push(h);
            breakeven_price.push(pi);
            gfpp_node.push(rng.random_range(0..nn));
            gen_cost.push(h * pi);
            commit_cost.push(rng.random_range(200.0..600.0));
        }
    }
    let gen_bus: Vec<usize> = (0..ng).map(|g| g % n_buses).collect();
    let gen_pmin: Vec<f64> = gen_pmax.iter().map(|p| 0.3 * p).collect();
    let gen_ramp: Vec<f64> = gen_pmax.iter().map(|p| 0.5 * p).collect();

    let total_pmax: f64 = gen_pmax.iter().sum();
    let bus_w: Vec<f64> = (0..n_buses).map(|_| rng.random_range(0.5..1.5)).collect();
    let wsum: f64 = bus_w.iter().sum();
    let e_profile: Vec<f64> = (0..nt).map(|t| if t == 0 { 1.0 } else { rng.random_range(0.8..1.0) }).collect();
    let mut bus_load = Matrix::zeros(n_buses, nt);
    for b in 0..n_buses {
        for t in 0..nt {
            bus_load.set(b, t, 0.45 * total_pmax * bus_w[b] / wsum * e_profile[t]);
        }
    }

    let node_base: Vec<f64> = (0..nn)
        .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random_range(100.0..500.0) })
        .collect();
    let g_profile: Vec<f64> = (0..nt).map(|t| if t == 0 { 1.0 } else { rng.random_range(0.8..1.0) }).collect();
    let demand: Vec<f64> = (0..nt)
        .flat_map(|t| node_base.iter().map(|d| d * g_profile[t]).collect::<Vec<_>>())
        .collect();

    let max_burn: f64 = (0..nk).map(|k| heat_rate[k] * gen_pmax[ng - nk + k]).sum();
    let peak_gas = DESIGN_GAS_STRESS * demand.iter().sum::<f64>() + max_burn;
    let cap_w: Vec<f64> = (0..n_suppliers).map(|_| rng.random_range(0.5..1.5)).collect();
    let cap_sum: f64 = cap_w.iter().sum();
    let supplier_cap: Vec<f64> = cap_w.iter().map(|w| 1.3 * peak_gas * w / cap_sum).collect();
    let pipe_cap: Vec<f64> = pipes.iter().map(|_| rng.random_range(0.25..0.6) * peak_gas).collect();
    let line_cap: Vec<f64> = lines.iter().map(|_| rng.random_range(0.3..0.6) * total_pmax).collect();
    let validity_m = 10.0 * supplier_cost.iter().sum::<f64>();

    let mut public = PublicMarket {
        dims: Dims {
            n_gen: ng,
            n_gfpp: nk,
            n_buses,
            n_lines: lines.len(),
            n_gas_nodes: nn,
            n_suppliers,
            n_pipes: pipes.len(),
            n_periods: nt,
        },
        stress_e: 1.0,
        stress_g: 1.0,
        commit_cost,
        reserve_factor: 1.1,
        gen_bus,
        gen_pmin,
        gen_pmax,
        gen_cost,
        gen_ramp,
        bus_load,
        line_from: lines.iter().map(|e| e.0).collect(),
        line_to: lines.iter().map(|e| e.1).collect(),
        line_cap,
        gfpp_node,
        heat_rate,
        breakeven_price,
        validity_m,
        supplier_node,
        supplier_cap,
        supplier_cost,
        pipe_from: pipes.iter().map(|e| e.0).collect(),
        pipe_to: pipes.iter().map(|e| e.1).collect(),
        pipe_cap,
    };

    let tol = Tolerances::default();
    let mut round = 0;
    loop {
        match solve_full_stackelberg(&public, &demand, &tol) {
            Ok(_) => break,
            Err(MarketError::Infeasible) => {}
            Err(e) => return Err(e),
        }
        round += 1;
        if round > REPAIR_ROUNDS {
            return Err(MarketError::GenerationFailed(REPAIR_ROUNDS));
        }
        for v in public
            .supplier_cap
            .iter_mut()
            .chain(public.pipe_cap.iter_mut())
            .chain(public.line_cap.iter_mut())
            .chain(public.gen_pmax.iter_mut())
        {
            *v *= REPAIR_GROWTH;
        }
        public.gen_ramp = public.gen_pmax.iter().map(|p| 0.5 * p).collect();
    }

    public.stress_e = gp.stress_e;
    public.stress_g = gp.stress_g;
    for b in 0..n_buses {
        for t in 0..nt {
            let v = public.bus_load.get(b, t) * gp.stress_e;
            public.bus_load.set(b, t, v);
        }
    }
    // metered to a 2⁻¹⁰ MWh grid
    let demand = demand.iter().map(|d| (d * gp.stress_g * 1024.0).round() / 1024.0).collect();
    Ok(MarketInstance {
        public,
        sensitive: SensitiveDemand::new(demand),
    })
}
