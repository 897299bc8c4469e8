//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p counterfax --test acceptance -- --nocapture`.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use counterfax_cli::run;
use counterfax_core::alphabet::{Alphabets, PermutedAlphabet};
use counterfax_core::classify::{
    classify_parsed, parse_answer, score_records, tabulate_valid_errors, ClassifyOptions, ResponseRecord, Verdict,
};
use counterfax_core::error::StatsError;
use counterfax_core::generate::{build_pair, generate_problem_set, problem_from_params};
use counterfax_core::harness::{build_prompt, evaluate, MockModel, MockPolicy, ModelEndpoint, PromptMode};
use counterfax_core::oracle::solve;
use counterfax_core::stats::{binomial_ci, fit_design, fit_logistic, AgentClass, RegressionSpec, TrialRow};
use counterfax_core::{AnalogyProblem, IntervalSize, LetterString, Rule, SideParams, TransformationType};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{alternative_answer, cp_oracle, direct_ml, violation, SCRIPT};

const PLAIN: &str = include_str!("../../core/tests/golden/plain_prompt.txt");
const TOOL: &str = include_str!("../../core/tests/golden/tool_prompt.txt");

fn ls(s: &str) -> LetterString {
    s.split_whitespace().collect::<String>().as_str().into()
}

fn worked_examples() {
    use TransformationType::*;
    let hw = PermutedAlphabet::hw();
    let cases: [(u8, TransformationType, SideParams, &str, &str); 12] = [
        (1, ExtendSequence, SideParams::at(0), "x y l k", "x y l k w"),
        (1, Successor, SideParams::at(0), "x y l k", "x y l w"),
        (1, Predecessor, SideParams::at(1), "y l k w", "x l k w"),
        (1, RemoveRedundant, SideParams::at(0).with_position(1), "x y y l k w", "x y l k w"),
        (1, FixSequence, SideParams::at(0).with_distractor(3, 'g'), "x y l g w", "x y l k w"),
        (1, Sort, SideParams::at(0).with_swap(1, 3), "x k l y w", "x y l k w"),
        (2, ExtendSequence, SideParams::at(0), "x y l k", "x y l k b"),
        (2, Successor, SideParams::at(0), "x y l k", "x y l b"),
        (2, Predecessor, SideParams::at(2), "l k w b", "x k w b"),
        (2, RemoveRedundant, SideParams::at(0).with_position(1), "x l l w f t", "x l w f t"),
        (2, FixSequence, SideParams::at(0).with_distractor(3, 'g'), "x l w g t", "x l w f t"),
        (2, Sort, SideParams::at(0).with_swap(1, 3), "x f w l t", "x l w f t"),
    ];
    let started = Instant::now();
    for (interval, t, side, a, b) in cases {
        let (got_a, got_b) = build_pair(&hw, t, IntervalSize::new(interval).unwrap(), &side).unwrap();
        assert_eq!(got_a.to_string(), ls(a).to_string(), "{t}/{interval}");
        assert_eq!(got_b.to_string(), ls(b).to_string(), "{t}/{interval}");
    }
    assert!(started.elapsed() < Duration::from_secs(1));
}

fn problem(t: TransformationType, interval: u8, source: SideParams, target: SideParams) -> AnalogyProblem {
    let interval = IntervalSize::new(interval).unwrap();
    problem_from_params(&PermutedAlphabet::hw(), t, interval, source, target, "acceptance".into(), 0).unwrap()
}

fn sort_problem() -> AnalogyProblem {
    problem(TransformationType::Sort, 1, SideParams::at(0).with_swap(1, 3), SideParams::at(10).with_swap(0, 4))
}

fn oracle_fidelity() {
    let hw = PermutedAlphabet::hw();
    let s1 = problem(TransformationType::Successor, 1, SideParams::at(0), SideParams::at(10));
    assert_eq!(s1.target_a, ls("j r q a"));
    assert_eq!(solve(&s1, &hw).unwrap(), ls("j r q h"));
    let s2 = problem(TransformationType::Successor, 2, SideParams::at(12), SideParams::at(3));
    assert_eq!((&s2.source_a, &s2.source_b), (&ls("q a h v"), &ls("q a h m")));
    assert_eq!(solve(&s2, &hw).unwrap(), ls("k w b t"));
    let sort = sort_problem();
    assert_eq!(sort.target_a, ls("h r q a j"));
    assert_eq!(solve(&sort, &hw).unwrap(), ls("j r q a h"));
}

fn classifier_fidelity() {
    let hw = PermutedAlphabet::hw();
    let p = sort_problem();
    let parsed = parse_answer("[h a q r j]").unwrap();
    match classify_parsed(&p, &hw, Some(&parsed), ClassifyOptions::default()).unwrap() {
        Verdict::ValidAlternative { rules } => assert!(rules.contains(&Rule::PositionalSwap { i: 1, j: 3 })),
        other => panic!("{other:?}"),
    }

    let problems = generate_problem_set(&hw, 300, &[IntervalSize::ONE, IntervalSize::TWO], 46).unwrap();
    let mut records = Vec::new();
    for (interval, t, valid, errors) in SCRIPT {
        let cell: Vec<&AnalogyProblem> =
            problems.iter().filter(|p| p.interval.get() == interval && p.transformation == t).collect();
        let alts: Vec<_> = cell.iter().filter_map(|p| Some((*p, alternative_answer(p, &hw)?))).collect();
        for (p, alt) in alts.iter().take(valid) {
            records.push(ResponseRecord::new(&p.id, "scripted", alt.to_string()));
        }
        for p in cell.iter().skip(valid).take(errors - valid) {
            records.push(ResponseRecord::new(&p.id, "scripted", LetterString(vec!['e'; p.target_a.len()]).to_string()));
        }
    }
    score_records(&problems, |_| Some(&hw), &mut records, ClassifyOptions::default()).unwrap();
    let table = tabulate_valid_errors(&records, &problems).unwrap();
    for (interval, t, valid, errors) in SCRIPT {
        let cell = &table.cells[&(IntervalSize::new(interval).unwrap(), t)];
        assert_eq!(cell.fraction_cell(), format!("{valid}\\{errors}"));
    }
    assert_eq!(table.overall_fraction(), Some(0.46));
    assert_eq!(table.overall_label(), "46% (23/50)");
}

fn fuzz() {
    let started = Instant::now();
    let mut n = 0;
    for (k, alphabet) in [PermutedAlphabet::hw(), PermutedAlphabet::alt()].into_iter().enumerate() {
        let set = generate_problem_set(&alphabet, 417, &[IntervalSize::ONE, IntervalSize::TWO], 1000 + k as u64).unwrap();
        for p in &set {
            assert_eq!(violation(p, &alphabet), None, "{}", p.id);
        }
        n += set.len();
    }
    assert!(n >= 10_000, "{n}");
    assert!(started.elapsed() < Duration::from_secs(30), "{:?}", started.elapsed());
}

fn cf(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["counterfax".to_string()];
    argv.extend(args.iter().map(|a| a.replace("{dir}", dir.to_str().unwrap())));
    run(argv)
}

fn oracle_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(cf(dir, &["gen", "--per-cell", "100", "--seed", "9", "--out", "{dir}/p.jsonl"]), 0);
    assert_eq!(cf(dir, &["eval", "--problems", "{dir}/p.jsonl", "--mode", "mock:ORACLE", "--out", "{dir}/r.jsonl"]), 0);
    assert_eq!(cf(dir, &["score", "--problems", "{dir}/p.jsonl", "--responses", "{dir}/r.jsonl", "--out", "{dir}/v.jsonl"]), 0);
    assert_eq!(
        cf(dir, &["stats", "--verdicts", "{dir}/v.jsonl", "--problems", "{dir}/p.jsonl", "--by-transformation", "--out", "{dir}/s.csv"]),
        0
    );
    let summary = std::fs::read_to_string(dir.join("s.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert_eq!(r.split(',').nth(3), Some("1.000000"), "{r}");
    }
}

/// Returns how many of 100 seeded runs have a 95% interval containing 0.6.
fn noisy_coverage() -> usize {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let alphabets = Alphabets::default();
    let mut endpoint = ModelEndpoint::new("noisy", PromptMode::Plain);
    endpoint.requests_per_minute = None;
    endpoint.parallelism = 16;
    let mut covered = 0;
    for rep in 0..100u64 {
        let set = generate_problem_set(&PermutedAlphabet::hw(), 100, &[IntervalSize::ONE, IntervalSize::TWO], rep).unwrap();
        assert_eq!(set.len(), 1200);
        let model = MockModel::new(MockPolicy::Noisy(0.6), rep, alphabets.clone());
        let mut run = runtime.block_on(evaluate(&set, &alphabets, &endpoint, &model, "noisy")).unwrap();
        score_records(&set, |id| alphabets.get(id), &mut run.records, ClassifyOptions::default()).unwrap();
        let k = run.records.iter().filter(|r| r.verdict == Some(Verdict::Correct)).count();
        let (lo, hi) = binomial_ci(k as u64, 1200, 0.95).unwrap();
        if (lo..=hi).contains(&0.6) {
            covered += 1;
        }
    }
    covered
}

fn noisy_pipeline() {
    let covered = noisy_coverage();
    println!("      noisy(0.6) coverage: {covered}/100");
    assert!(covered >= 92, "coverage {covered}/100");
}

fn stats_oracles() {
    let m = AgentClass::Model("m".into());
    let rows: Vec<TrialRow> = [(IntervalSize::ONE, 80), (IntervalSize::TWO, 60)]
        .into_iter()
        .flat_map(|(interval, correct)| {
            let m = m.clone();
            (0..100).map(move |k| TrialRow {
                agent: m.clone(),
                participant_id: None,
                interval,
                transformation: TransformationType::Sort,
                correct: k < correct,
            })
        })
        .collect();
    let fit = fit_logistic(&rows, &RegressionSpec::interval_only()).unwrap();
    assert!((fit.coefficients[0] - 1.3863).abs() < 1e-4);
    assert!((fit.coefficients[1] + 0.9808).abs() < 1e-4);

    let (lo, hi) = binomial_ci(5, 10, 0.95).unwrap();
    let (olo, ohi) = cp_oracle(5, 10, 0.95);
    assert!((lo - olo).abs() < 1e-6 && (hi - ohi).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut fitted = 0;
    while fitted < 50 {
        let n = rng.random_range(30..80);
        let k = rng.random_range(2..4);
        let mut x = DMatrix::zeros(n, k);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..k {
                x[(i, j)] = rng.random_range(-2.0..2.0);
            }
            y[i] = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        }
        let Ok(fit) = fit_design(&x, &y, vec![]) else { continue };
        let direct = direct_ml(&x, &y);
        for j in 0..k {
            assert!((fit.coefficients[j] - direct[j]).abs() < 1e-6);
        }
        fitted += 1;
    }

    let separated: Vec<TrialRow> = rows
        .iter()
        .map(|r| TrialRow { correct: r.interval == IntervalSize::ONE, ..r.clone() })
        .collect();
    assert!(matches!(
        fit_logistic(&separated, &RegressionSpec::interval_only()),
        Err(StatsError::SeparationDetected { .. })
    ));
}

fn prompt_goldens() {
    let hw = PermutedAlphabet::hw();
    let p = problem(TransformationType::Successor, 1, SideParams::at(0), SideParams::at(10));
    assert_eq!(build_prompt(&p, &hw, PromptMode::Plain)[1].content, PLAIN);
    assert_eq!(build_prompt(&p, &hw, PromptMode::ToolAugmented)[0].content, TOOL);
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn()); 8] = [
        ("worked-example fidelity", worked_examples),
        ("oracle fidelity", oracle_fidelity),
        ("classifier fidelity", classifier_fidelity),
        ("self-consistency fuzz (10k problems)", fuzz),
        ("pipeline identity: ORACLE accuracy 1.0 in every cell", oracle_pipeline),
        ("pipeline identity: Noisy(0.6) interval coverage", noisy_pipeline),
        ("statistics oracles", stats_oracles),
        ("prompt golden files", prompt_goldens),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let started = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(check)).is_ok();
        println!("{} {name} ({:.2?})", if ok { "PASS" } else { "FAIL" }, started.elapsed());
        if !ok {
            failed.push(name);
        }
    }
    println!("NOT GATED published human and model accuracies (need live API access and participant data)");
    assert!(failed.is_empty(), "failed: {failed:?}");
}
