use comet_bench::output::{csv_string, fmt_f64, CSV_HEADER};
use comet_bench::verify::CHECK_NAMES;
use comet_bench::{
    run_experiment, summary_rows, verify_bounds, ExperimentConfig, Outcome, ProblemSpec, SolverSpec,
};
use comet_core::solvers::{Method, SolveResult};

fn config(solvers: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ProblemSpec::Synthetic { m: 40, xi: 2 });
    cfg.solvers = solvers
        .iter()
        .map(|s| SolverSpec::parse(s).unwrap())
        .collect();
    cfg.max_iters = 2000;
    cfg
}

fn only(report: &comet_bench::ExperimentReport) -> &SolveResult {
    report.cells[0].result.as_ref().unwrap()
}

#[test]
fn one_iteration_gives_header_and_one_row() {
    let mut cfg = config(&["comet"]);
    cfg.max_iters = 1;
    let rep = run_experiment(&cfg).unwrap();
    let csv = csv_string(only(&rep));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("1,"));
    assert!(
        lines[1].ends_with(','),
        "elapsed column stays empty without timing"
    );
}

#[test]
fn csv_round_trips_gap_and_distance_exactly() {
    let rep = run_experiment(&config(&["comet:3"])).unwrap();
    let r = only(&rep);
    let csv = csv_string(r);
    for (line, rec) in csv.lines().skip(1).zip(&r.records) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 10);
        assert_eq!(cols[0].parse::<usize>().unwrap(), rec.k);
        assert_eq!(
            cols[2].parse::<f64>().unwrap().to_bits(),
            rec.gap.unwrap().to_bits()
        );
        assert_eq!(
            cols[3].parse::<f64>().unwrap().to_bits(),
            rec.dist.unwrap().to_bits()
        );
        assert_eq!(cols[4], fmt_f64(rec.l_k));
    }
}

#[test]
fn baselines_leave_comet_columns_empty() {
    let rep = run_experiment(&config(&["fista"])).unwrap();
    let csv = csv_string(only(&rep));
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(row[5].is_empty() && row[6].is_empty());
}

#[test]
fn summary_counts_match_the_trace() {
    let mut cfg = config(&["comet:1", "comet:2", "fista", "amgs"]);
    cfg.target_dist = 1e-5;
    let rep = run_experiment(&cfg).unwrap();
    let rows = summary_rows(&rep, cfg.target_dist);
    for (row, cell) in rows.iter().zip(&rep.cells) {
        let r = cell.result.as_ref().unwrap();
        let first = r
            .records
            .iter()
            .find(|x| x.dist.unwrap() <= 1e-5)
            .map(|x| x.k);
        assert_eq!(row.iters_to_target, first, "{}", row.label);
        assert_eq!(row.iterations, r.records.len());
        assert_eq!(row.prox_calls, r.records.last().unwrap().prox_calls);
    }
}

#[test]
fn every_solver_starts_from_the_same_point() {
    let rep = run_experiment(&config(&["comet", "fista", "amgs"])).unwrap();
    let x0 = &rep.built.x0;
    for c in &rep.cells {
        assert_eq!(&c.config.x0, x0);
        assert_eq!(c.result.as_ref().unwrap().start.objective.to_bits(), {
            rep.cells[0]
                .result
                .as_ref()
                .unwrap()
                .start
                .objective
                .to_bits()
        });
    }
    assert!(x0.iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn seeds_change_the_problem() {
    let a = run_experiment(&config(&["comet"])).unwrap();
    let mut cfg = config(&["comet"]);
    cfg.seed = 1;
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(a.built.x0, b.built.x0);
    assert_ne!(csv_string(only(&a)), csv_string(only(&b)));
}

#[test]
fn zero_mu_substitution_is_recorded() {
    let mut cfg = config(&["comet:1"]);
    cfg.solvers[0].mu = Some(0.0);
    let rep = run_experiment(&cfg).unwrap();
    assert!(rep.cells[0].substituted);
    let gamma0 = only(&rep).gamma0.unwrap();
    assert_eq!(gamma0, 1e-3 * rep.cells[0].config.l0);
    assert!(rep
        .built
        .metadata
        .iter()
        .any(|(k, v)| k == "substitution" && v.contains("comet-v1")));
}

#[test]
fn variant_three_passes_every_check() {
    let rep = run_experiment(&config(&["comet:3"])).unwrap();
    let cell = &rep.cells[0];
    let report = verify_bounds(
        cell.result.as_ref().unwrap(),
        &rep.built.problem,
        &cell.config,
    );
    assert_eq!(report.checks.len(), CHECK_NAMES.len());
    for c in &report.checks {
        assert!(c.outcome.passed(), "{}: {:?}", c.name, c.outcome);
    }
}

#[test]
fn corrupted_lambda_trace_is_flagged_at_the_right_index() {
    let rep = run_experiment(&config(&["comet:2"])).unwrap();
    let cell = &rep.cells[0];
    let mut r = cell.result.clone().unwrap();
    let target = 5;
    r.records[target].lambda_k = Some(2.0);
    r.records[target + 3].lambda_k = Some(2.0);
    let report = verify_bounds(&r, &rep.built.problem, &cell.config);
    match report.get("lambda_loose").unwrap() {
        Outcome::Fail { first_k, count, .. } => {
            assert_eq!(*first_k, r.records[target].k);
            assert!(*count >= 2);
        }
        other => panic!("expected a failure, got {other:?}"),
    }
    assert!(report.to_string().contains("lambda_loose: FAIL"));
}

#[test]
fn baselines_have_no_bound_checks() {
    let rep = run_experiment(&config(&["fista", "amgs"])).unwrap();
    for cell in &rep.cells {
        let report = verify_bounds(
            cell.result.as_ref().unwrap(),
            &rep.built.problem,
            &cell.config,
        );
        assert!(report
            .checks
            .iter()
            .all(|c| matches!(c.outcome, Outcome::NotApplicable(_))));
        assert!(!report.any_failed());
    }
}

#[test]
fn timing_fills_the_elapsed_column() {
    let mut cfg = config(&["amgs"]);
    cfg.timing = true;
    let rep = run_experiment(&cfg).unwrap();
    assert!(only(&rep).records.iter().all(|r| r.elapsed_s.is_some()));
    assert_eq!(only(&rep).method, Method::Amgs);
}
