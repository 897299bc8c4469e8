mod support;
use support::{alternative_answer, SCRIPT};

use counterfax_core::alphabet::PermutedAlphabet;
use counterfax_core::classify::{
    classify_parsed, parse_answer, tabulate_valid_errors, ClassifyOptions, ResponseRecord, Verdict,
};
use counterfax_core::generate::{generate_problem_set, problem_from_params};
use counterfax_core::oracle::solve;
use counterfax_core::stats::{rows_from_records, summarize, CiMethod, Grouping};
use counterfax_core::{AnalogyProblem, IntervalSize, LetterString, Rule, SideParams, TransformationType};

fn sort_problem() -> AnalogyProblem {
    problem_from_params(
        &PermutedAlphabet::hw(),
        TransformationType::Sort,
        IntervalSize::ONE,
        SideParams::at(0).with_swap(1, 3),
        SideParams::at(10).with_swap(0, 4),
        "sort".into(),
        0,
    )
    .unwrap()
}

#[test]
fn sort_example_and_swap_alternative() {
    let hw = PermutedAlphabet::hw();
    let p = sort_problem();
    assert_eq!(p.source_a, "xklyw".into());
    assert_eq!(p.source_b, "xylkw".into());
    assert_eq!(p.target_a, "hrqaj".into());
    assert_eq!(solve(&p, &hw).unwrap(), "jrqah".into());
    let parsed = parse_answer("[h a q r j]").unwrap();
    let v = classify_parsed(&p, &hw, Some(&parsed), ClassifyOptions::default()).unwrap();
    match v {
        Verdict::ValidAlternative { rules } => assert!(rules.contains(&Rule::PositionalSwap { i: 1, j: 3 })),
        other => panic!("{other:?}"),
    }
}

#[test]
fn copying_source_b_is_flagged_separately() {
    let hw = PermutedAlphabet::hw();
    let p = sort_problem();
    let v = classify_parsed(&p, &hw, Some(&p.source_b), ClassifyOptions::default()).unwrap();
    assert!(v.is_literal_copy() && v.is_error());
}

#[test]
fn scripted_responses_tabulate_to_forty_six_percent() {
    let hw = PermutedAlphabet::hw();
    let problems = generate_problem_set(&hw, 300, &[IntervalSize::ONE, IntervalSize::TWO], 46).unwrap();
    let mut records = Vec::new();
    for (interval, t, valid, errors) in SCRIPT {
        let cell: Vec<&AnalogyProblem> = problems
            .iter()
            .filter(|p| p.interval.get() == interval && p.transformation == t)
            .collect();
        let with_alt: Vec<_> = cell.iter().filter_map(|p| Some((*p, alternative_answer(p, &hw)?))).collect();
        assert!(with_alt.len() >= valid, "{t}/{interval}: only {} problems with alternatives", with_alt.len());
        for (p, alt) in with_alt.iter().take(valid) {
            records.push(ResponseRecord::new(&p.id, "scripted", alt.to_string()));
        }
        // wrong answers no rule explains: a constant string
        for p in cell.iter().skip(valid).take(errors - valid) {
            let junk = LetterString(vec!['e'; p.target_a.len()]);
            records.push(ResponseRecord::new(&p.id, "scripted", junk.to_string()));
        }
        for p in cell.iter().skip(errors).take(5) {
            records.push(ResponseRecord::new(&p.id, "scripted", p.answer.clone().unwrap().to_string()));
        }
    }
    counterfax_core::classify::score_records(
        &problems,
        |_| Some(&hw),
        &mut records,
        ClassifyOptions::default(),
    )
    .unwrap();

    let table = tabulate_valid_errors(&records, &problems).unwrap();
    for (interval, t, valid, errors) in SCRIPT {
        let cell = &table.cells[&(IntervalSize::new(interval).unwrap(), t)];
        assert_eq!((cell.valid_alt, cell.errors), (valid, errors), "{t}/{interval}");
        assert_eq!(cell.fraction_cell(), format!("{valid}\\{errors}"));
    }
    let totals = table.totals();
    assert_eq!((totals.valid_alt, totals.errors), (23, 50));
    assert_eq!(table.overall_fraction(), Some(0.46));
    assert_eq!(table.overall_label(), "46% (23/50)");
    let text = table.to_string();
    assert!(text.contains("6\\10") && text.contains("10\\10") && text.contains("0\\9"), "{text}");

    // the same records flow into accuracy summaries
    let rows = rows_from_records(&problems, &records).unwrap();
    let summary = summarize(&rows, Grouping::Interval, CiMethod::ClopperPearson, 0.95).unwrap();
    assert_eq!(summary.len(), 2);
    let n_errors: usize = summary.iter().map(|s| s.summary.n_trials - s.summary.n_correct).sum();
    assert_eq!(n_errors, 50);
}

#[test]
fn tables_without_errors_render_a_dash() {
    let hw = PermutedAlphabet::hw();
    let problems = generate_problem_set(&hw, 1, &[IntervalSize::ONE], 1).unwrap();
    let mut records: Vec<_> = problems
        .iter()
        .map(|p| ResponseRecord::new(&p.id, "m", p.answer.clone().unwrap().to_string()))
        .collect();
    counterfax_core::classify::score_records(&problems, |_| Some(&hw), &mut records, ClassifyOptions::default())
        .unwrap();
    let table = tabulate_valid_errors(&records, &problems).unwrap();
    assert_eq!(table.overall_label(), "–");
    assert!(table.to_string().contains("0\\0"));
}

#[test]
fn orphan_records_are_a_missing_join() {
    let hw = PermutedAlphabet::hw();
    let problems = generate_problem_set(&hw, 1, &[IntervalSize::ONE], 1).unwrap();
    let mut r = ResponseRecord::new("nope", "m", "[a b c d]");
    r.verdict = Some(Verdict::Invalid);
    assert!(matches!(
        rows_from_records(&problems, &[r.clone()]),
        Err(counterfax_core::error::StatsError::MissingJoin(ids)) if ids == vec!["nope".to_string()]
    ));
    assert!(tabulate_valid_errors(&[r], &problems).is_err());
}
