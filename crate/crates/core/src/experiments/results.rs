//! Tab-separated results files.
//!
//! The first line is `# ppsm-results v1`, the second the column names in
//! [`COLUMNS`] order. Reals use the shortest representation that reads back
//! to the same `f64`; booleans are `0`/`1`; `NaN` marks an undefined metric.

use super::ExperimentError;
use crate::mechanism::RunRecord;
use std::fmt::Write as _;

pub const RESULTS_HEADER: &str = "# ppsm-results v1";

pub const COLUMNS: [&str; 22] = [
    "variant",
    "alpha",
    "eta",
    "stress_e",
    "stress_g",
    "rep",
    "seed",
    "baseline",
    "satisfied",
    "timeout",
    "fail_step",
    "l1_demand_error",
    "delta_O_uc_pct",
    "delta_O_e_pct",
    "delta_O_g_pct",
    "thm4_premise",
    "thm4_lhs",
    "thm4_rhs",
    "thm5_status",
    "thm5_lhs",
    "thm5_rhs",
    "fidelity_nodes",
];

fn b(v: bool) -> &'static str {
    if v {
        "1"
    } else {
        "0"
    }
}

pub fn record_line(r: &RunRecord) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.variant,
        r.alpha,
        r.eta_pct,
        r.stress_e,
        r.stress_g,
        r.rep,
        r.seed,
        b(r.baseline),
        b(r.satisfied),
        b(r.timeout),
        r.fail_step,
        r.l1_error,
        r.delta_uc_pct,
        r.delta_e_pct,
        r.delta_g_pct,
        b(r.thm4_premise),
        r.thm4_lhs,
        r.thm4_rhs,
        r.thm5_status,
        r.thm5_lhs,
        r.thm5_rhs,
        r.nodes,
    );
    s
}

pub fn render_results(records: &[RunRecord]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n{}\n", COLUMNS.join("\t"));
    for r in records {
        s.push_str(&record_line(r));
        s.push('\n');
    }
    s
}

fn bad(line: usize, msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Results { line, msg: msg.into() }
}

pub fn parse_results(src: &str) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut lines = src.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(bad(1, format!("expected `{RESULTS_HEADER}`"))),
    }
    match lines.next() {
        Some((_, h)) if h.split('\t').eq(COLUMNS.iter().copied()) => {}
        _ => return Err(bad(2, "unexpected column header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != COLUMNS.len() {
            return Err(bad(n, format!("{} fields, expected {}", f.len(), COLUMNS.len())));
        }
        let real = |k: usize| f[k].parse::<f64>().map_err(|_| bad(n, format!("bad real in `{}`", COLUMNS[k])));
        let int = |k: usize| f[k].parse::<u64>().map_err(|_| bad(n, format!("bad integer in `{}`", COLUMNS[k])));
        let flag = |k: usize| match f[k] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(n, format!("bad flag in `{}`", COLUMNS[k]))),
        };
        out.push(RunRecord {
            variant: f[0].to_string(),
            alpha: real(1)?,
            eta_pct: real(2)?,
            stress_e: real(3)?,
            stress_g: real(4)?,
            rep: int(5)?,
            seed: int(6)?,
            baseline: flag(7)?,
            satisfied: flag(8)?,
            timeout: flag(9)?,
            fail_step: f[10].to_string(),
            l1_error: real(11)?,
            delta_uc_pct: real(12)?,
            delta_e_pct: real(13)?,
            delta_g_pct: real(14)?,
            thm4_premise: flag(15)?,
            thm4_lhs: real(16)?,
            thm4_rhs: real(17)?,
            thm5_status: f[18].to_string(),
            thm5_lhs: real(19)?,
            thm5_rhs: real(20)?,
            nodes: int(21)? as usize,
        });
    }
    Ok(out)
}
