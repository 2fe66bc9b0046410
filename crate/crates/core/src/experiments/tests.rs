use super::*;

fn tiny() -> SweepSpec {
    SweepSpec {
        alphas: vec![100.0],
        etas: vec![0.1],
        stress_e: vec![1.0],
        stress_g: vec![1.1],
        repetitions: 1,
        ..SweepSpec::default()
    }
}

fn rec(variant: &str, alpha: f64, sat: bool, d: f64) -> RunRecord {
    let mut r = blank(Variant::parse(variant).unwrap(), alpha, 0.1, 1.0, 1.1, 0, 0);
    r.baseline = true;
    r.satisfied = sat;
    if sat {
        r.l1_error = d;
        r.delta_uc_pct = d;
        r.delta_e_pct = d;
        r.delta_g_pct = d;
    }
    r
}

#[test]
fn spec_round_trips_and_fills_defaults() {
    let s = SweepSpec {
        base_seed: u64::MAX - 3,
        variants: vec![Variant::Ppsm],
        ..tiny()
    };
    assert_eq!(SweepSpec::from_text(&s.to_text()).unwrap(), s);
    let partial = "# ppsm-sweep v1\nvector alphas 1\n5\nend\n";
    let p = SweepSpec::from_text(partial).unwrap();
    assert_eq!(p.alphas, vec![5.0]);
    assert_eq!(p.repetitions, 30);
}

#[test]
fn invalid_specs_are_rejected() {
    for bad in [
        SweepSpec { alphas: vec![], ..tiny() },
        SweepSpec { repetitions: 0, ..tiny() },
        SweepSpec { variants: vec![], ..tiny() },
        SweepSpec { etas: vec![-1.0], ..tiny() },
    ] {
        assert!(matches!(bad.validate(), Err(ExperimentError::Spec(_))));
    }
    assert!(SweepSpec::from_text("# ppsm-sweep v1\ntext variants Foo\nend\n").is_err());
}

#[test]
fn single_cell_sweep_matches_a_direct_run() {
    let spec = SweepSpec {
        variants: vec![Variant::Ppsm],
        ..tiny()
    };
    let recs = run_sweep(&spec).unwrap();
    assert_eq!(recs.len(), 1);
    let inst = generate(&spec.generate_params(1.0, 1.1), instance_seed(&spec, 0)).unwrap();
    let base = Baseline::prepare(&inst, &Tolerances::default()).unwrap();
    let seed = run_seed(spec.base_seed, 100.0, 0.1, 1.0, 1.1, 0);
    let cfg = run_config(&spec, Variant::Ppsm, 100.0, 0.1, seed);
    let direct = run_one(&inst, &base, &cfg, blank(Variant::Ppsm, 100.0, 0.1, 1.0, 1.1, 0, seed));
    assert_eq!(record_line(&recs[0]), record_line(&direct));
}

#[test]
fn schedules_give_identical_files() {
    let spec = SweepSpec {
        stress_e: vec![1.0, 1.3],
        repetitions: 2,
        ..tiny()
    };
    let seq = run_sweep_with(&spec, Schedule::Sequential, |_| {}).unwrap();
    assert_eq!(seq.len(), spec.num_runs());
    #[cfg(feature = "parallel")]
    {
        let par = run_sweep_with(&spec, Schedule::Parallel(3), |_| {}).unwrap();
        assert_eq!(render_results(&seq), render_results(&par));
    }
    let again = run_sweep_with(&spec, Schedule::Sequential, |_| {}).unwrap();
    assert_eq!(render_results(&seq), render_results(&again));
}

#[test]
fn results_round_trip_through_text() {
    let spec = SweepSpec {
        variants: vec![Variant::Laplace, Variant::Ppsm],
        ..tiny()
    };
    let dir = tempfile::tempdir().unwrap();
    let recs = run_sweep_to_dir(&spec, Schedule::Sequential, dir.path()).unwrap();
    let back = read_results_dir(dir.path()).unwrap();
    assert_eq!(render_results(&back), render_results(&recs));
    let timings = std::fs::read_to_string(dir.path().join(TIMINGS_FILE)).unwrap();
    assert_eq!(timings.lines().count(), 1 + recs.len());
    let spec_back = SweepSpec::from_text(&std::fs::read_to_string(dir.path().join(SPEC_FILE)).unwrap()).unwrap();
    assert_eq!(spec_back, spec);
}

#[test]
fn malformed_results_are_reported_with_line_numbers() {
    let good = render_results(&[rec("PPSM", 10.0, true, 1.0)]);
    assert!(matches!(parse_results("nope\n"), Err(ExperimentError::Results { line: 1, .. })));
    let broken = good.replace("\t10\t", "\tten\t");
    assert!(matches!(parse_results(&broken), Err(ExperimentError::Results { line: 3, .. })));
}

#[test]
fn all_zero_deltas_summarize_to_zeros() {
    let recs: Vec<RunRecord> = (0..3).map(|_| rec("PPSM", 10.0, true, 0.0)).collect();
    let t = summarize(&recs, GroupBy::Alpha).unwrap();
    assert_eq!(t.rows.len(), 1);
    let r = &t.rows[0];
    assert_eq!((r.sat_pct, r.mean_l1, r.mean_uc, r.mean_e, r.mean_g), (100.0, 0.0, 0.0, 0.0, 0.0));
}

#[test]
fn hand_built_records_give_hand_computed_means() {
    let recs = vec![
        rec("Laplace", 10.0, true, 2.0),
        rec("Laplace", 10.0, true, 4.0),
        rec("Laplace", 10.0, false, 0.0),
        rec("PPSM", 10.0, true, 1.0),
    ];
    let t = summarize(&recs, GroupBy::Alpha).unwrap();
    let lap = t.row(Variant::Laplace, 10.0).unwrap();
    assert_eq!(lap.runs, 3);
    assert!((lap.sat_pct - 200.0 / 3.0).abs() < 1e-12);
    assert_eq!(lap.mean_uc, 3.0);
    assert_eq!(t.row(Variant::Ppsm, 10.0).unwrap().mean_g, 1.0);
    assert_eq!(t.rows[0].variant, "Laplace");
    assert!(t.to_text().contains("66.67"));
    assert_eq!(t.to_tsv().lines().count(), 2 + 2);
    assert!(matches!(summarize(&[], GroupBy::Eta), Err(ExperimentError::Empty)));
}

#[test]
fn heatmap_flags_cells_without_satisfied_runs() {
    let mut recs = vec![rec("Laplace", 10.0, false, 0.0), rec("Laplace", 10.0, false, 0.0)];
    let mut other = rec("Laplace", 10.0, true, 5.0);
    other.stress_e = 1.3;
    recs.push(other);
    let maps = heatmap_data(&recs, "delta_O_uc_pct").unwrap();
    assert_eq!(maps.len(), 1);
    let h = &maps[0];
    assert_eq!(h.stress_e, vec![1.0, 1.3]);
    assert_eq!(h.mean[0][0], None);
    assert_eq!(h.mean[1][0], Some(5.0));
    assert_eq!((h.satisfied[0][0], h.runs[0][0]), (0, 2));
    let text = render_heatmap(h);
    assert!(text.contains("1\tNA") && text.contains("0/2") && text.contains("1/0"));
    assert!(matches!(heatmap_data(&recs, "bogus"), Err(ExperimentError::UnknownMetric(_))));
}

#[test]
fn single_cell_heatmap_equals_the_summary_value() {
    let recs = vec![rec("PPSM", 10.0, true, 1.0), rec("PPSM", 10.0, true, 2.0)];
    let h = &heatmap_data(&recs, "delta_O_uc_pct").unwrap()[0];
    let t = summarize(&recs, GroupBy::Alpha).unwrap();
    assert_eq!(h.mean, vec![vec![Some(t.rows[0].mean_uc)]]);
}

#[test]
fn verify_catches_bound_and_count_violations() {
    let mut a = rec("PPSM", 10.0, true, 1.0);
    a.thm4_premise = true;
    a.thm4_lhs = 1.0;
    a.thm4_rhs = 2.0;
    assert!(verify(std::slice::from_ref(&a), Some(1)).passed());
    let mut b = a.clone();
    b.thm4_lhs = 3.0;
    assert!(!verify(&[b], Some(1)).passed());
    let mut c = a.clone();
    c.thm5_status = "qualifying".into();
    c.thm5_lhs = 1.0;
    c.thm5_rhs = 0.0;
    assert!(!verify(&[c], Some(1)).passed());
    assert!(!verify(&[a], Some(2)).passed());
}
