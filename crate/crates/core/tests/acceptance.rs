//! Acceptance criteria, one test each. Every test writes a single
//! `criterion N: PASS|FAIL ...` line straight to stderr (bypassing output
//! capture) before asserting.

mod common;

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use falsify_core::cli::{
    falsify, load_campaign, load_run_config, run_campaign, FalsifyOptions, RunConfig, SweepSummary,
};
use falsify_core::fitness::ManualFitness;
use falsify_core::plants::{
    cruise_control, plant, simulate, simulate_with, water_tank, PlantRegistry, SimulationOptions,
};
use falsify_core::search::{
    archive_csv, metropolis_accept, run_search, Algorithm, Outcome, Problem, Requirement,
    SearchBudget, SearchConfig,
};
use falsify_core::stl::{evaluate_bool_at, parse_stl, robustness, robustness_at};
use falsify_core::testseq::{compile_table, parse_testsuite};
use falsify_core::Trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> RunConfig {
    load_run_config(&repo().join("configs").join(name)).unwrap()
}

fn report(n: usize, title: &str, ok: bool, detail: &str) {
    let line = format!(
        "criterion {n}: {} {title} [{detail}]\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn seeded_runs(
    problem: &Problem,
    base: &SearchConfig,
    budget: usize,
    runs: u64,
) -> Vec<falsify_core::search::SearchResult> {
    (1..=runs)
        .map(|seed| {
            let c = SearchConfig { seed, ..*base };
            run_search(problem, &c, &SearchBudget::evaluations(budget)).unwrap()
        })
        .collect()
}

fn falsified(results: &[falsify_core::search::SearchResult]) -> usize {
    results
        .iter()
        .filter(|r| r.outcome == Outcome::Falsified)
        .count()
}

#[test]
fn criterion_1_stl_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let mut formulas = 0;
    let mut comparisons = 0;
    let mut sign_checks = 0;
    let mut errors_matched = 0;
    let mut mismatches = Vec::new();
    let mut seen: Vec<&'static str> = Vec::new();
    while formulas < 1200 {
        let dt = [0.1, 0.25, 0.5, 1.0][rng.random_range(0..4)];
        let phi = common::random_formula(&mut rng, 3, dt);
        let steps = common::horizon_steps(&phi, dt);
        if steps + 1 > 50 {
            continue;
        }
        formulas += 1;
        common::operators(&phi, &mut seen);
        for _ in 0..3 {
            let samples = rng.random_range(steps + 1..=50);
            let trace = common::random_trace(&mut rng, &common::SIGNALS, samples, dt);
            let slack = samples - 1 - steps;
            for k in [0, rng.random_range(0..=slack)] {
                comparisons += 1;
                let expected = common::robustness(&phi, &trace, k);
                let actual = robustness_at(&phi, &trace, trace.time(k)).map(|r| r.value());
                match (expected, &actual) {
                    (Some(e), Ok(a)) if common::same(e, *a) => {
                        if *a != 0.0 {
                            sign_checks += 1;
                            let b = evaluate_bool_at(&phi, &trace, trace.time(k)).unwrap();
                            if b != (*a > 0.0) {
                                mismatches.push(format!("sign: {phi} at {k}: rho {a}, bool {b}"));
                            }
                        }
                    }
                    (None, Err(_)) => errors_matched += 1,
                    _ => mismatches
                        .push(format!("{phi} at {k}: oracle {expected:?}, got {actual:?}")),
                }
            }
        }
    }
    let operators: BTreeSet<&str> = seen.into_iter().collect();
    let elapsed = started.elapsed().as_secs_f64();
    let ok = mismatches.is_empty() && operators.len() == 8 && elapsed < 60.0;
    report(
        1,
        "STL robustness equals brute-force oracle",
        ok,
        &format!(
            "{formulas} formulas, {comparisons} comparisons, {sign_checks} sign checks, \
             {errors_matched} matched errors, {} operators, {} mismatches, {elapsed:.1}s{}",
            operators.len(),
            mismatches.len(),
            mismatches
                .first()
                .map(|m| format!("; first: {m}"))
                .unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_2_cruise_control_falsification() {
    let config = config("cruise_control.json");
    assert_eq!(config.weight, 0.5);
    assert_eq!(config.manual_fitness.as_deref(), Some("1 - mean(throttle)"));
    assert_eq!(config.search.algorithm, Algorithm::SimulatedAnnealing);
    let problem = config.problem(&PlantRegistry::builtin()).unwrap();
    let results = seeded_runs(&problem, &config.search, 300, 20);
    let phi = parse_stl("G[0,30](speed <= 120)").unwrap();
    let mut rechecked = 0;
    let mut recheck_failures = Vec::new();
    for r in results.iter().filter(|r| r.outcome == Outcome::Falsified) {
        let entry = r.falsifying.as_ref().unwrap();
        // Standalone re-run: instantiate, simulate, evaluate.
        let suite =
            parse_testsuite(&std::fs::read_to_string(config.suite_path()).unwrap()).unwrap();
        let inputs = suite.sequence.instantiate(&entry.params, 0.1).unwrap();
        let substep = SimulationOptions {
            dt: Some(0.01),
            initial_state: None,
        };
        let outputs = simulate_with(&cruise_control(), &inputs, &substep).unwrap();
        let rho = robustness(&phi, &outputs).unwrap().value();
        if rho < 0.0 && rho.to_bits() == entry.report.raw_automatic.to_bits() {
            rechecked += 1;
        } else {
            recheck_failures.push(format!(
                "params {:?}: {rho} vs {}",
                entry.params, entry.report.raw_automatic
            ));
        }
    }
    let count = falsified(&results);
    report(
        2,
        "cruise_control SA falsification rate and standalone re-check",
        count >= 18 && recheck_failures.is_empty(),
        &format!("falsified {count}/20 (need >= 18), re-checked {rechecked}, failures {recheck_failures:?}"),
    );
}

#[test]
fn criterion_3_domain_knowledge_benefit() {
    let (campaign, mut base) =
        load_campaign(&repo().join("configs/cruise_weight_sweep.json")).unwrap();
    base.budget = SearchBudget::evaluations(150);
    let result = run_campaign(&campaign, &base, 4).unwrap();
    let point = |label: &str| -> &SweepSummary {
        result
            .summaries
            .iter()
            .find(|s| s.sweep_value == label)
            .unwrap()
    };
    let labels = ["0", "0.25", "0.5", "0.75", "1"];
    assert_eq!(result.summaries.len(), labels.len());
    assert!(result
        .summaries
        .iter()
        .all(|s| s.runs == 20 && s.errors == 0));
    let rates: Vec<usize> = labels.iter().map(|l| point(l).falsified).collect();
    let non_constant = rates.iter().any(|&r| r != rates[0]);
    let (half, full) = (point("0.5").median_evals, point("1").median_evals);
    report(
        3,
        "weight 0.5 needs no more evaluations than weight 1, rate profile varies",
        half <= full && non_constant,
        &format!("median evals w=0.5 {half} vs w=1 {full}; falsified per weight {rates:?} of 20"),
    );
}

#[test]
fn criterion_4_annealing_and_random_complement() {
    let started = Instant::now();
    let (campaign, base) = load_campaign(&repo().join("configs/ridge_algorithms.json")).unwrap();
    assert_eq!(base.budget.max_evaluations, 300);
    let ridge = run_campaign(&campaign, &base, 4).unwrap();
    let rate = |name: &str| {
        ridge
            .summaries
            .iter()
            .find(|s| s.sweep_value == name)
            .unwrap()
            .falsified
    };
    let (ridge_sa, ridge_random) = (rate("simulated_annealing"), rate("uniform_random"));

    let cruise = config("cruise_control.json");
    let problem = cruise.problem(&PlantRegistry::builtin()).unwrap();
    let sa = falsified(&seeded_runs(&problem, &cruise.search, 300, 20));
    let uniform = SearchConfig {
        algorithm: Algorithm::UniformRandom,
        ..cruise.search
    };
    let random = falsified(&seeded_runs(&problem, &uniform, 300, 20));
    let elapsed = started.elapsed().as_secs_f64();
    report(
        4,
        "SA >= random on ridge, both >= 15/20 on cruise_control",
        ridge_sa >= ridge_random && sa >= 15 && random >= 15 && elapsed < 600.0,
        &format!(
            "ridge SA {ridge_sa}/20 vs random {ridge_random}/20; cruise SA {sa}/20, random {random}/20; {elapsed:.1}s"
        ),
    );
}

fn strip_timing(json: &str) -> serde_json::Value {
    let mut value: serde_json::Value = serde_json::from_str(json).unwrap();
    let object = value.as_object_mut().unwrap();
    assert!(object.remove("elapsed_seconds").is_some());
    assert!(object.remove("timestamp").is_some());
    value
}

#[test]
fn criterion_5_reductions_and_determinism() {
    let cruise = config("cruise_control.json");
    let suite = cruise.load_suite().unwrap();
    let make = |manual: Option<&str>, weight: f64, requirement: &str| {
        Problem::new(
            plant("cruise_control").unwrap(),
            suite.sequence.clone(),
            Requirement::Formula(parse_stl(requirement).unwrap()),
            manual.map(|m| ManualFitness::parse(m).unwrap()),
            weight,
            0.1,
        )
        .unwrap()
    };
    let budget = SearchBudget::evaluations(120);
    let mut checks = Vec::new();
    for algorithm in [Algorithm::SimulatedAnnealing, Algorithm::UniformRandom] {
        let c = SearchConfig {
            algorithm,
            seed: 17,
            ..SearchConfig::default()
        };
        let with = run_search(
            &make(Some("1 - mean(throttle)"), 1.0, "G[0,30](speed <= 120)"),
            &c,
            &budget,
        )
        .unwrap();
        let without = run_search(&make(None, 1.0, "G[0,30](speed <= 120)"), &c, &budget).unwrap();
        checks.push((
            format!("weight-1 archive ({})", algorithm.name()),
            archive_csv(&with.archive, 3) == archive_csv(&without.archive, 3)
                && with.archive == without.archive,
        ));
    }

    let dir = tempfile::tempdir().unwrap();
    let path = repo().join("configs/cruise_control.json");
    let run = |sub: &str| {
        falsify(
            &path,
            &FalsifyOptions {
                seed: None,
                output_dir: Some(dir.path().join(sub)),
            },
        )
        .unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let read =
        |sub: &str, file: &str| std::fs::read_to_string(dir.path().join(sub).join(file)).unwrap();
    checks.push((
        "repeat result.json".into(),
        strip_timing(&read("a", "result.json")) == strip_timing(&read("b", "result.json")),
    ));
    checks.push((
        "repeat archive.csv".into(),
        read("a", "archive.csv") == read("b", "archive.csv"),
    ));
    let traces = a.result.outcome == Outcome::Falsified
        && b.result.outcome == Outcome::Falsified
        && read("a", "falsifying_trace.csv") == read("b", "falsifying_trace.csv");
    checks.push(("repeat falsifying_trace.csv".into(), traces));

    let zero = run_search(
        &make(None, 1.0, "G[0,30](speed <= 120)"),
        &SearchConfig::default(),
        &SearchBudget::evaluations(0),
    )
    .unwrap();
    checks.push((
        "budget 0 is NFF with no entries".into(),
        zero.outcome == Outcome::Nff && zero.evaluations == 0,
    ));
    for algorithm in [Algorithm::SimulatedAnnealing, Algorithm::UniformRandom] {
        let c = SearchConfig {
            algorithm,
            seed: 4,
            ..SearchConfig::default()
        };
        let r = run_search(
            &make(Some("1 - mean(throttle)"), 0.5, "G[0,30](speed <= 10000)"),
            &c,
            &SearchBudget::evaluations(50),
        )
        .unwrap();
        checks.push((
            format!(
                "unreachable bound uses 50 evaluations ({})",
                algorithm.name()
            ),
            r.outcome == Outcome::Nff && r.evaluations == 50 && r.archive.len() == 50,
        ));
    }
    let failed: Vec<&String> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| n)
        .collect();
    report(
        5,
        "reductions and determinism",
        failed.is_empty(),
        &format!("{} checks, failed {failed:?}", checks.len()),
    );
}

/// Replaces every parameter reference with its nominal literal and drops the
/// declarations, giving the engineer's original unparameterized test.
fn strip_parameters(text: &str) -> String {
    let decl = Regex::new(r"^\s*param\s+(\w+)\s+in\s+\[[^\]]*\]\s+nominal\s+([-+0-9.eE]+)\s*;\s*$")
        .unwrap();
    let mut nominals = Vec::new();
    let mut kept = Vec::new();
    for line in text.lines() {
        match decl.captures(line) {
            Some(c) => nominals.push((c[1].to_string(), c[2].to_string())),
            None => kept.push(line.to_string()),
        }
    }
    kept.into_iter()
        .map(|line| {
            if !line.trim_start().starts_with("step") {
                return line;
            }
            nominals.iter().fold(line, |line, (name, value)| {
                Regex::new(&format!(r"\b{name}\b"))
                    .unwrap()
                    .replace_all(&line, value.as_str())
                    .into_owned()
            })
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_6_driver_round_trip() {
    let mut suites: Vec<PathBuf> = std::fs::read_dir(repo().join("suites"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "suite"))
        .collect();
    suites.sort();
    let mut round_trips = Vec::new();
    for path in &suites {
        let text = std::fs::read_to_string(path).unwrap();
        let parameterized = parse_testsuite(&text).unwrap().sequence;
        let baseline = parse_testsuite(&strip_parameters(&text)).unwrap().sequence;
        assert!(baseline.parameters().is_empty());
        let mut identical = true;
        for dt in [0.01, 0.1, 0.25] {
            let nominal = parameterized.search_space().nominal;
            let a = parameterized.instantiate(&nominal, dt).unwrap();
            let b = baseline.instantiate(&[], dt).unwrap();
            identical &= a.write_csv() == b.write_csv()
                && a.rows()
                    .zip(b.rows())
                    .all(|(x, y)| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        round_trips.push((
            path.file_name().unwrap().to_string_lossy().into_owned(),
            identical,
        ));
    }

    let suite = parse_testsuite(
        &std::fs::read_to_string(repo().join("suites/cruise_control.suite")).unwrap(),
    )
    .unwrap();
    let table = suite.table.unwrap();
    assert_eq!(table.rows().len(), 1);
    let compiled = compile_table(&table, 30.0).unwrap();
    let written = parse_stl("G[0,30](throttle >= 0.9 -> speed <= 120)").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut exact = 0;
    for _ in 0..100 {
        let dt: f64 = [0.1, 0.5, 1.0][rng.random_range(0..3)];
        let samples = (30.0 / dt).round() as usize + 1 + rng.random_range(0..5);
        let columns = vec![
            (0..samples).map(|_| rng.random_range(0.0..1.0)).collect(),
            (0..samples)
                .map(|_| rng.random_range(100.0..130.0))
                .collect(),
        ];
        let trace =
            Trace::from_columns(0.0, dt, vec!["throttle".into(), "speed".into()], columns).unwrap();
        let (a, b) = (
            robustness(&compiled, &trace).unwrap(),
            robustness(&written, &trace).unwrap(),
        );
        if a.value().to_bits() == b.value().to_bits() {
            exact += 1;
        }
    }
    let all_round_trip = suites.len() >= 3 && round_trips.iter().all(|(_, ok)| *ok);
    report(
        6,
        "nominal instantiation reproduces baselines, table compiles exactly",
        all_round_trip && exact == 100,
        &format!("round trips {round_trips:?}; table robustness identical on {exact}/100 traces"),
    );
}

#[test]
fn criterion_7_metropolis_frequency() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 100_000;
    let accepted = (0..trials)
        .filter(|_| metropolis_accept(0.05, 0.05, &mut rng))
        .count();
    let frequency = accepted as f64 / trials as f64;
    let target = (-1.0f64).exp();
    report(
        7,
        "Metropolis acceptance at delta/T = 1",
        (frequency - target).abs() <= 0.01,
        &format!("frequency {frequency:.4}, target {target:.4} +/- 0.01"),
    );
}

/// Independent scalar RK4 of the cruise-control speed equation.
fn reference_speed(throttle: f64, horizon: f64, h: f64) -> f64 {
    let cc = cruise_control();
    let (a, vmax, b) = (
        cc.constant("a").unwrap(),
        cc.constant("vmax").unwrap(),
        cc.constant("b").unwrap(),
    );
    let f = |v: f64| a * throttle * (vmax - v) / vmax - b * v;
    let steps = (horizon / h).round() as usize;
    let mut v = 0.0;
    for _ in 0..steps {
        let k1 = f(v);
        let k2 = f(v + h / 2.0 * k1);
        let k3 = f(v + h / 2.0 * k2);
        let k4 = f(v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    v
}

#[test]
fn criterion_8_plant_oracles() {
    let cc = cruise_control();
    let dt = cc.default_dt();
    let horizon = 100.0;
    let n = (horizon / dt).round() as usize + 1;
    let full = Trace::from_columns(
        0.0,
        dt,
        cc.inputs().to_vec(),
        vec![vec![1.0; n], vec![0.0; n]],
    )
    .unwrap();
    let simulated = *simulate(&cc, &full).unwrap().column(0).last().unwrap();
    let reference = reference_speed(1.0, horizon, dt / 100.0);
    let steady_ok = (simulated - reference).abs() <= 0.1;

    let idle = Trace::from_columns(
        0.0,
        dt,
        cc.inputs().to_vec(),
        vec![vec![0.0; n], vec![0.0; n]],
    )
    .unwrap();
    let cc_rest = simulate(&cc, &idle)
        .unwrap()
        .column(0)
        .iter()
        .all(|&v| v == 0.0);
    let wt = water_tank();
    let closed = Trace::from_columns(0.0, dt, wt.inputs().to_vec(), vec![vec![0.0; n]]).unwrap();
    let wt_rest = simulate(&wt, &closed)
        .unwrap()
        .column(0)
        .iter()
        .all(|&v| v == 0.0);
    report(
        8,
        "cruise_control steady state matches dt/100 reference, zero-input equilibria exact",
        steady_ok && cc_rest && wt_rest,
        &format!(
            "speed {simulated:.6} vs reference {reference:.6} (|diff| <= 0.1); cruise rest {cc_rest}, tank rest {wt_rest}"
        ),
    );
}
