use super::ExperimentError;
use crate::fidelity::Variant;
use crate::mechanism::RunRecord;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupBy {
    Alpha,
    Eta,
}

impl GroupBy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Eta => "eta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "alpha" => Some(Self::Alpha),
            "eta" => Some(Self::Eta),
            _ => None,
        }
    }

    fn key(&self, r: &RunRecord) -> f64 {
        match self {
            Self::Alpha => r.alpha,
            Self::Eta => r.eta_pct,
        }
    }
}

/// Aggregates of one (variant, key) group. Means run over satisfied runs
/// and are `NaN` when there are none.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub key: f64,
    pub runs: usize,
    pub satisfied: usize,
    pub sat_pct: f64,
    pub mean_l1: f64,
    pub mean_uc: f64,
    pub mean_e: f64,
    pub mean_g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryTable {
    pub by: GroupBy,
    pub rows: Vec<SummaryRow>,
}

fn variant_rank(name: &str) -> u64 {
    Variant::parse(name).map_or(u64::MAX, |v| v.index())
}

fn mean(vals: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = vals.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn group<K: Ord>(records: &[RunRecord], key: impl Fn(&RunRecord) -> K) -> BTreeMap<K, Vec<&RunRecord>> {
    let mut m: BTreeMap<K, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        m.entry(key(r)).or_default().push(r);
    }
    m
}

fn row(variant: &str, key: f64, rs: &[&RunRecord]) -> SummaryRow {
    let sat: Vec<&&RunRecord> = rs.iter().filter(|r| r.satisfied).collect();
    SummaryRow {
        variant: variant.to_string(),
        key,
        runs: rs.len(),
        satisfied: sat.len(),
        sat_pct: 100.0 * sat.len() as f64 / rs.len() as f64,
        mean_l1: mean(sat.iter().map(|r| r.l1_error)),
        mean_uc: mean(sat.iter().map(|r| r.delta_uc_pct)),
        mean_e: mean(sat.iter().map(|r| r.delta_e_pct)),
        mean_g: mean(sat.iter().map(|r| r.delta_g_pct)),
    }
}

pub fn summarize(records: &[RunRecord], by: GroupBy) -> Result<SummaryTable, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Empty);
    }
    let groups = group(records, |r| (variant_rank(&r.variant), r.variant.clone(), by.key(r).to_bits()));
    let rows = groups
        .iter()
        .map(|((_, v, k), rs)| {
            let row = row(v, f64::from_bits(*k), rs);
            if row.satisfied == 0 {
                log::warn!("no satisfied runs for {v} at {}={}", by.name(), row.key);
            }
            row
        })
        .collect();
    Ok(SummaryTable { by, rows })
}

fn cell(v: f64, prec: usize) -> String {
    if v.is_finite() {
        format!("{v:.prec$}")
    } else {
        "NA".into()
    }
}

impl SummaryTable {
    pub fn row(&self, variant: Variant, key: f64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.variant == variant.name() && r.key == key)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<8} {:>8} {:>6} {:>8} {:>12} {:>10} {:>10} {:>10}\n",
            "variant",
            self.by.name(),
            "runs",
            "sat(%)",
            "D_L1(MWh)",
            "O_uc(%)",
            "O_e(%)",
            "O_g(%)"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<8} {:>8} {:>6} {:>8} {:>12} {:>10} {:>10} {:>10}",
                r.variant,
                r.key,
                r.runs,
                cell(r.sat_pct, 2),
                cell(r.mean_l1, 3),
                cell(r.mean_uc, 4),
                cell(r.mean_e, 4),
                cell(r.mean_g, 4)
            );
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!(
            "# ppsm-summary v1\nvariant\t{}\truns\tsatisfied\tsat_pct\tmean_l1_demand_error\tmean_delta_O_uc_pct\tmean_delta_O_e_pct\tmean_delta_O_g_pct\n",
            self.by.name()
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.variant, r.key, r.runs, r.satisfied, r.sat_pct, r.mean_l1, r.mean_uc, r.mean_e, r.mean_g
            );
        }
        s
    }
}

/// Metrics accepted by [`heatmap_data`].
pub const METRICS: [&str; 5] = ["delta_O_uc_pct", "delta_O_e_pct", "delta_O_g_pct", "l1_demand_error", "sat_pct"];

/// Stress grid of one (variant, α, η): rows are electricity stress, columns
/// gas stress. `mean` is `None` for cells without a satisfied run.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub variant: String,
    pub alpha: f64,
    pub eta: f64,
    pub metric: String,
    pub stress_e: Vec<f64>,
    pub stress_g: Vec<f64>,
    pub mean: Vec<Vec<Option<f64>>>,
    pub satisfied: Vec<Vec<usize>>,
    pub runs: Vec<Vec<usize>>,
}

impl Heatmap {
    pub fn file_name(&self) -> String {
        format!("heatmap_{}_{}_alpha{}_eta{}.tsv", self.metric, self.variant, self.alpha, self.eta)
    }

    /// Mean over the cells that have a value.
    pub fn grid_mean(&self) -> f64 {
        mean(self.mean.iter().flatten().map(|v| v.unwrap_or(f64::NAN)))
    }
}

fn metric_value(r: &RunRecord, metric: &str) -> f64 {
    match metric {
        "delta_O_uc_pct" => r.delta_uc_pct,
        "delta_O_e_pct" => r.delta_e_pct,
        "delta_O_g_pct" => r.delta_g_pct,
        _ => r.l1_error,
    }
}

fn sorted_unique(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = vals.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn heatmap_data(records: &[RunRecord], metric: &str) -> Result<Vec<Heatmap>, ExperimentError> {
    if !METRICS.contains(&metric) {
        return Err(ExperimentError::UnknownMetric(metric.into()));
    }
    if records.is_empty() {
        return Err(ExperimentError::Empty);
    }
    let se = sorted_unique(records.iter().map(|r| r.stress_e));
    let sg = sorted_unique(records.iter().map(|r| r.stress_g));
    let groups = group(records, |r| {
        (variant_rank(&r.variant), r.variant.clone(), r.alpha.to_bits(), r.eta_pct.to_bits())
    });
    let mut maps = Vec::new();
    for ((_, v, a, e), rs) in groups {
        let mut h = Heatmap {
            variant: v,
            alpha: f64::from_bits(a),
            eta: f64::from_bits(e),
            metric: metric.into(),
            stress_e: se.clone(),
            stress_g: sg.clone(),
            mean: vec![vec![None; sg.len()]; se.len()],
            satisfied: vec![vec![0; sg.len()]; se.len()],
            runs: vec![vec![0; sg.len()]; se.len()],
        };
        for (i, &x) in se.iter().enumerate() {
            for (j, &y) in sg.iter().enumerate() {
                let cell: Vec<&&RunRecord> = rs.iter().filter(|r| r.stress_e == x && r.stress_g == y).collect();
                let sat: Vec<&&RunRecord> = cell.iter().copied().filter(|r| r.satisfied).collect();
                h.runs[i][j] = cell.len();
                h.satisfied[i][j] = sat.len();
                h.mean[i][j] = if metric == "sat_pct" {
                    (!cell.is_empty()).then(|| 100.0 * sat.len() as f64 / cell.len() as f64)
                } else {
                    let m = mean(sat.iter().map(|r| metric_value(r, metric)));
                    m.is_finite().then_some(m)
                };
            }
        }
        maps.push(h);
    }
    Ok(maps)
}

/// Grid file: the metric grid, then a `satisfied/unsatisfied` count grid.
/// Cells without a satisfied run hold `NA`.
pub fn render_heatmap(h: &Heatmap) -> String {
    let mut s = format!(
        "# ppsm-heatmap v1\n# variant {} alpha {} eta {} metric {}\n",
        h.variant, h.alpha, h.eta, h.metric
    );
    let header: Vec<String> = h.stress_g.iter().map(|g| g.to_string()).collect();
    let _ = writeln!(s, "stress_e\\stress_g\t{}", header.join("\t"));
    for (i, e) in h.stress_e.iter().enumerate() {
        let vals: Vec<String> = h.mean[i].iter().map(|v| v.map_or("NA".into(), |x| x.to_string())).collect();
        let _ = writeln!(s, "{e}\t{}", vals.join("\t"));
    }
    s.push_str("# counts satisfied/unsatisfied\n");
    let _ = writeln!(s, "stress_e\\stress_g\t{}", header.join("\t"));
    for (i, e) in h.stress_e.iter().enumerate() {
        let vals: Vec<String> = (0..h.stress_g.len())
            .map(|j| format!("{}/{}", h.satisfied[i][j], h.runs[i][j] - h.satisfied[i][j]))
            .collect();
        let _ = writeln!(s, "{e}\t{}", vals.join("\t"));
    }
    s
}

/// Re-assertion of the per-run bounds and the grid accounting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub runs: usize,
    pub thm4_checked: usize,
    pub thm5_checked: usize,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const BOUND_SLACK: f64 = 1e-6;

/// `repetitions`, when given, is the count every grid cell must hold.
pub fn verify(records: &[RunRecord], repetitions: Option<u64>) -> VerifyReport {
    let mut rep = VerifyReport {
        runs: records.len(),
        ..VerifyReport::default()
    };
    for r in records {
        let id = format!("{} alpha={} eta={} stress=({}, {}) rep={}", r.variant, r.alpha, r.eta_pct, r.stress_e, r.stress_g, r.rep);
        if r.thm4_premise {
            rep.thm4_checked += 1;
            if !(r.thm4_lhs <= r.thm4_rhs + BOUND_SLACK * (1.0 + r.thm4_rhs)) {
                rep.failures.push(format!("{id}: demand error {} exceeds {}", r.thm4_lhs, r.thm4_rhs));
            }
        }
        if r.thm5_status == "qualifying" {
            rep.thm5_checked += 1;
            if !(r.thm5_lhs <= r.thm5_rhs + BOUND_SLACK * (1.0 + r.thm5_rhs.abs())) {
                rep.failures.push(format!("{id}: leader objective error {} exceeds {}", r.thm5_lhs, r.thm5_rhs));
            }
        }
        if r.satisfied && r.timeout {
            rep.failures.push(format!("{id}: timed out but marked satisfied"));
        }
    }
    let cells = group(records, |r| {
        (r.variant.clone(), [r.alpha.to_bits(), r.eta_pct.to_bits(), r.stress_e.to_bits(), r.stress_g.to_bits()])
    });
    let expected = repetitions.map(|n| n as usize).or_else(|| cells.values().map(|c| c.len()).max());
    for ((v, k), rs) in &cells {
        let sat = rs.iter().filter(|r| r.satisfied).count();
        let unsat = rs.len() - sat;
        if Some(sat + unsat) != expected {
            rep.failures.push(format!(
                "{v} alpha={} eta={} stress=({}, {}): {sat}+{unsat} runs, expected {}",
                f64::from_bits(k[0]),
                f64::from_bits(k[1]),
                f64::from_bits(k[2]),
                f64::from_bits(k[3]),
                expected.unwrap_or(0)
            ));
        }
    }
    rep
}
