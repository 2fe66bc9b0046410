//! Parameter sweeps over the mechanism and their aggregation into summary
//! tables and stress heatmaps.
//!
//! One work unit is a (stress cell, repetition) pair: it generates the
//! instance, clears the true game once, and runs every variant, α and η on it.
//! Units are independent; with the `parallel` feature they run on a rayon pool.

mod results;
mod spec;
mod summary;

pub use results::{parse_results, record_line, render_results, COLUMNS, RESULTS_HEADER};
pub use spec::{SweepSpec, SPEC_KIND};
pub use summary::{
    heatmap_data, render_heatmap, summarize, verify, GroupBy, Heatmap, SummaryRow, SummaryTable, VerifyReport,
    METRICS,
};

use crate::fidelity::Variant;
use crate::lp::Tolerances;
use crate::markets::{generate, MarketError, MarketInstance};
use crate::mechanism::{
    check_theorem4, check_theorem5, evaluate, run_mechanism_with, Baseline, FailureKind, MechanismError, PpsmConfig,
    RunRecord, Thm5Status,
};
use crate::predictors::PredictorConfig;
use crate::rng::derive_seed;
use std::path::Path;
use std::sync::mpsc;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep spec: {0}")]
    Spec(String),
    #[error("results line {line}: {msg}")]
    Results { line: usize, msg: String },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("no records")]
    Empty,
    #[error(transparent)]
    Text(#[from] crate::textio::TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Seed of the base instance of one repetition; every stress cell scales
/// the same instance.
pub fn instance_seed(spec: &SweepSpec, rep: u64) -> u64 {
    derive_seed(spec.base_seed, &[rep])
}

/// Seed of one run, a hash of its grid coordinates. The variant is left out
/// so that all variants post-process the same obfuscated demand.
pub fn run_seed(base: u64, alpha: f64, eta: f64, stress_e: f64, stress_g: f64, rep: u64) -> u64 {
    derive_seed(base, &[alpha.to_bits(), eta.to_bits(), stress_e.to_bits(), stress_g.to_bits(), rep])
}

pub fn run_config(spec: &SweepSpec, variant: Variant, alpha: f64, eta: f64, seed: u64) -> PpsmConfig {
    let mut cfg = PpsmConfig::new(variant, alpha, eta, seed).expect("validated sweep spec");
    cfg.privacy.epsilon = spec.epsilon;
    cfg.leader_predictor = PredictorConfig {
        noise_fraction: spec.leader_noise,
        source: spec.source,
    };
    cfg.follower_predictor = PredictorConfig {
        noise_fraction: spec.follower_noise,
        source: spec.source,
    };
    cfg.fidelity.node_limit = spec.node_limit;
    cfg.fidelity.time_limit = Some(Duration::from_secs_f64(spec.time_budget));
    cfg.bnb.node_limit = spec.node_limit;
    cfg.bnb.time_limit = Some(Duration::from_secs_f64(spec.time_budget));
    cfg
}

fn blank(variant: Variant, alpha: f64, eta: f64, stress_e: f64, stress_g: f64, rep: u64, seed: u64) -> RunRecord {
    RunRecord {
        variant: variant.name().to_string(),
        alpha,
        eta_pct: eta,
        stress_e,
        stress_g,
        rep,
        seed,
        baseline: false,
        satisfied: false,
        timeout: false,
        fail_step: "-".into(),
        l1_error: f64::NAN,
        delta_uc_pct: f64::NAN,
        delta_e_pct: f64::NAN,
        delta_g_pct: f64::NAN,
        thm4_premise: false,
        thm4_lhs: f64::NAN,
        thm4_rhs: f64::NAN,
        thm5_status: "NA".into(),
        thm5_lhs: f64::NAN,
        thm5_rhs: f64::NAN,
        nodes: 0,
    }
}

/// One mechanism run followed by its evaluation and bound checks.
pub fn run_one(inst: &MarketInstance, baseline: &Baseline, cfg: &PpsmConfig, mut rec: RunRecord) -> RunRecord {
    let tol = *cfg.tol();
    rec.baseline = baseline.solution.is_some();
    if !rec.baseline {
        rec.fail_step = "baseline".into();
        return rec;
    }
    let (release, trace) = match run_mechanism_with(inst, baseline, cfg) {
        Ok(r) => r,
        Err(MechanismError::StepFailed { step, kind, trace }) => {
            rec.fail_step = step.name().into();
            rec.timeout = kind == FailureKind::Timeout;
            rec.nodes = trace.fidelity.as_ref().map_or(0, |r| r.nodes);
            return rec;
        }
        Err(e) => {
            log::warn!("run {} failed: {e}", rec.seed);
            rec.fail_step = "error".into();
            return rec;
        }
    };
    rec.nodes = trace.fidelity.as_ref().map_or(0, |r| r.nodes);
    match evaluate(inst, baseline, &release, &tol) {
        Ok(ev) => {
            rec.satisfied = ev.satisfied;
            rec.l1_error = ev.l1_error;
            rec.delta_uc_pct = ev.delta_uc_pct;
            rec.delta_e_pct = ev.delta_e_pct;
            rec.delta_g_pct = ev.delta_g_pct;
            if !ev.satisfied {
                rec.fail_step = "clearing".into();
            }
        }
        Err(e) => {
            log::warn!("evaluation of run {} failed: {e}", rec.seed);
            rec.fail_step = "error".into();
        }
    }
    if let Ok(Some(t4)) = check_theorem4(inst, &trace, &tol) {
        rec.thm4_premise = t4.premise;
        rec.thm4_lhs = t4.lhs;
        rec.thm4_rhs = t4.rhs;
    }
    if let Ok(t5) = check_theorem5(inst, baseline, &trace, cfg) {
        rec.thm5_status = t5.status.name().into();
        if t5.status == Thm5Status::Qualifying {
            rec.thm5_lhs = t5.lhs;
            rec.thm5_rhs = t5.rhs;
        }
    }
    rec
}

/// A finished run and its wall time.
pub type Timed = (RunRecord, Duration);

/// Every run of one (stress cell, repetition) unit.
pub fn run_unit(spec: &SweepSpec, stress_e: f64, stress_g: f64, rep: u64) -> Vec<Timed> {
    let tol = Tolerances::default();
    let start = Instant::now();
    let prepared = generate(&spec.generate_params(stress_e, stress_g), instance_seed(spec, rep))
        .and_then(|inst| Baseline::prepare(&inst, &tol).map(|b| (inst, b)));
    let setup = start.elapsed();
    let mut out = Vec::new();
    for &variant in &spec.variants {
        for &alpha in &spec.alphas {
            for &eta in &spec.etas {
                let seed = run_seed(spec.base_seed, alpha, eta, stress_e, stress_g, rep);
                let rec = blank(variant, alpha, eta, stress_e, stress_g, rep, seed);
                let t0 = Instant::now();
                let rec = match &prepared {
                    Ok((inst, base)) => run_one(inst, base, &run_config(spec, variant, alpha, eta, seed), rec),
                    Err(e) => {
                        log::warn!("instance for rep {rep} at stress ({stress_e}, {stress_g}) unavailable: {e}");
                        RunRecord {
                            fail_step: match e {
                                MarketError::GenerationFailed(_) => "generate".into(),
                                _ => "error".into(),
                            },
                            ..rec
                        }
                    }
                };
                out.push((rec, t0.elapsed() + setup));
            }
        }
    }
    out
}

fn sort_key(r: &RunRecord) -> (u64, [u64; 4], u64) {
    let v = Variant::parse(&r.variant).map_or(u64::MAX, |v| v.index());
    // positive reals order like their bit patterns
    (v, [r.alpha.to_bits(), r.eta_pct.to_bits(), r.stress_e.to_bits(), r.stress_g.to_bits()], r.rep)
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by_key(sort_key);
}

fn units(spec: &SweepSpec) -> Vec<(f64, f64, u64)> {
    let mut u = Vec::new();
    for &e in &spec.stress_e {
        for &g in &spec.stress_g {
            for rep in 0..spec.repetitions {
                u.push((e, g, rep));
            }
        }
    }
    u
}

/// How work units are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    /// Rayon pool with this many threads, 0 for the default.
    #[cfg(feature = "parallel")]
    Parallel(usize),
}

impl Default for Schedule {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Schedule::Parallel(0);
        #[cfg(not(feature = "parallel"))]
        Schedule::Sequential
    }
}

/// Runs every unit, sending each finished run to `sink` in completion order.
/// Returns the records sorted by grid coordinates.
pub fn run_sweep_with(
    spec: &SweepSpec,
    schedule: Schedule,
    sink: impl FnMut(&Timed),
) -> Result<Vec<RunRecord>, ExperimentError> {
    spec.validate()?;
    let units = units(spec);
    let (tx, rx) = mpsc::sync_channel::<Vec<Timed>>(64);
    let mut sink = sink;
    let mut records = Vec::with_capacity(spec.num_runs());
    std::thread::scope(|s| {
        let producer = s.spawn(|| produce(spec, &units, schedule, tx));
        for batch in rx {
            for t in &batch {
                sink(t);
            }
            records.extend(batch.into_iter().map(|(r, _)| r));
        }
        producer.join().expect("sweep worker panicked")
    })?;
    sort_records(&mut records);
    Ok(records)
}

fn produce(
    spec: &SweepSpec,
    units: &[(f64, f64, u64)],
    schedule: Schedule,
    tx: mpsc::SyncSender<Vec<Timed>>,
) -> Result<(), ExperimentError> {
    match schedule {
        Schedule::Sequential => {
            for &(e, g, rep) in units {
                let _ = tx.send(run_unit(spec, e, g, rep));
            }
            Ok(())
        }
        #[cfg(feature = "parallel")]
        Schedule::Parallel(threads) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| ExperimentError::Pool(e.to_string()))?;
            pool.install(|| {
                units.par_iter().for_each_with(tx, |tx, &(e, g, rep)| {
                    let _ = tx.send(run_unit(spec, e, g, rep));
                })
            });
            Ok(())
        }
    }
}

/// Runs the sweep with the default schedule.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<RunRecord>, ExperimentError> {
    run_sweep_with(spec, Schedule::default(), |_| {})
}

pub const RESULTS_FILE: &str = "results.tsv";
pub const TIMINGS_FILE: &str = "timings.tsv";
pub const SPEC_FILE: &str = "spec.txt";

/// Runs the sweep into `out`: `spec.txt`, the sorted `results.tsv`, and
/// `timings.tsv`, which is appended in completion order as runs finish.
pub fn run_sweep_to_dir(spec: &SweepSpec, schedule: Schedule, out: &Path) -> Result<Vec<RunRecord>, ExperimentError> {
    use std::io::Write;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(SPEC_FILE), spec.to_text())?;
    let mut timings = std::io::BufWriter::new(std::fs::File::create(out.join(TIMINGS_FILE))?);
    writeln!(timings, "variant\talpha\teta\tstress_e\tstress_g\trep\twall_seconds")?;
    let mut io_err = None;
    let records = run_sweep_with(spec, schedule, |(r, d)| {
        let line = format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            r.variant,
            r.alpha,
            r.eta_pct,
            r.stress_e,
            r.stress_g,
            r.rep,
            d.as_secs_f64()
        );
        if let Err(e) = writeln!(timings, "{line}") {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    timings.flush()?;
    std::fs::write(out.join(RESULTS_FILE), render_results(&records))?;
    Ok(records)
}

pub fn read_results_dir(dir: &Path) -> Result<Vec<RunRecord>, ExperimentError> {
    parse_results(&std::fs::read_to_string(dir.join(RESULTS_FILE))?)
}

#[cfg(test)]
mod tests;
