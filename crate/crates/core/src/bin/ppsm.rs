use clap::{Parser, Subcommand};
use ppsm::experiments::{
    heatmap_data, read_results_dir, render_heatmap, run_sweep_to_dir, summarize, verify, GroupBy, Schedule,
    SweepSpec, SPEC_FILE,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ppsm", version, about = "Privacy-preserving market clearing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write results into a directory.
    Sweep {
        /// Sweep spec file; the default suite when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print summary tables and write summary_<by>.tsv.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = ["alpha", "eta"], default_value = "alpha")]
        by: String,
    },
    /// Write one stress-grid file per (variant, alpha, eta).
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "delta_O_uc_pct")]
        metric: String,
    },
    /// Re-check the per-run bounds and the grid accounting.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the default sweep spec.
    DefaultSpec,
}

fn schedule(threads: Option<usize>) -> Schedule {
    match threads {
        Some(1) => Schedule::Sequential,
        #[cfg(feature = "parallel")]
        Some(n) => Schedule::Parallel(n),
        #[cfg(feature = "parallel")]
        None => Schedule::Parallel(0),
        #[cfg(not(feature = "parallel"))]
        _ => Schedule::Sequential,
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Sweep { spec, out, threads } => {
            let spec = match spec {
                Some(p) => SweepSpec::from_text(&std::fs::read_to_string(p)?)?,
                None => SweepSpec::default(),
            };
            let start = std::time::Instant::now();
            let recs = run_sweep_to_dir(&spec, schedule(threads), &out)?;
            let sat = recs.iter().filter(|r| r.satisfied).count();
            println!(
                "{} runs, {sat} satisfied, {:.1} s, results in {}",
                recs.len(),
                start.elapsed().as_secs_f64(),
                out.display()
            );
            Ok(true)
        }
        Command::Summarize { input, by } => {
            let by = GroupBy::parse(&by).expect("restricted by clap");
            let table = summarize(&read_results_dir(&input)?, by)?;
            print!("{}", table.to_text());
            std::fs::write(input.join(format!("summary_{}.tsv", by.name())), table.to_tsv())?;
            Ok(true)
        }
        Command::Heatmap { input, metric } => {
            let maps = heatmap_data(&read_results_dir(&input)?, &metric)?;
            for h in &maps {
                let path = input.join(h.file_name());
                std::fs::write(&path, render_heatmap(h))?;
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Verify { input } => {
            let recs = read_results_dir(&input)?;
            let reps = std::fs::read_to_string(input.join(SPEC_FILE))
                .ok()
                .and_then(|s| SweepSpec::from_text(&s).ok())
                .map(|s| s.repetitions);
            let report = verify(&recs, reps);
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            println!(
                "{} runs; demand bound checked on {}, leader bound checked on {}; {} failures",
                report.runs,
                report.thm4_checked,
                report.thm5_checked,
                report.failures.len()
            );
            Ok(report.passed())
        }
        Command::DefaultSpec => {
            print!("{}", SweepSpec::default().to_text());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::parse_from(std::iter::once("ppsm").chain(args.iter().copied()))
    }

    #[test]
    fn sweep_summarize_heatmap_verify_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec {
            alphas: vec![100.0],
            stress_e: vec![1.0, 1.2],
            stress_g: vec![1.1],
            repetitions: 2,
            ..SweepSpec::default()
        };
        let spec_path = dir.path().join("spec.in");
        std::fs::write(&spec_path, spec.to_text()).unwrap();
        let out = dir.path().join("out");
        let (s, o) = (spec_path.to_str().unwrap(), out.to_str().unwrap());
        assert!(run(cli(&["sweep", "--spec", s, "--out", o, "--threads", "1"])).unwrap());
        assert_eq!(read_results_dir(&out).unwrap().len(), spec.num_runs());
        assert!(run(cli(&["summarize", "--in", o, "--by", "eta"])).unwrap());
        assert!(out.join("summary_eta.tsv").exists());
        assert!(run(cli(&["heatmap", "--in", o, "--metric", "sat_pct"])).unwrap());
        let grids = std::fs::read_dir(&out)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("heatmap_"))
            .count();
        assert_eq!(grids, 3);
        assert!(run(cli(&["verify", "--in", o])).unwrap());
    }

    #[test]
    fn bad_inputs_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        assert!(run(cli(&["summarize", "--in", d])).is_err());
        assert!(Cli::try_parse_from(["ppsm", "summarize", "--in", d, "--by", "beta"]).is_err());
        assert!(run(cli(&["default-spec"])).unwrap());
    }
}
