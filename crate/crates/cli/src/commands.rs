use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use counterfax_core::classify::{
    parse_answer, score_records, tabulate_valid_errors, ClassifyOptions, ResponseRecord, ValidErrorTable, Verdict,
};
use counterfax_core::generate::generate_problem_set;
use counterfax_core::harness::{evaluate, ChatModel, MockModel, ModelEndpoint, OpenAiChat, PromptMode};
use counterfax_core::oracle::solve;
use counterfax_core::problem::{read_problems, write_problems, ExportMode};
use counterfax_core::stats::{
    format_report, rows_from_records, standard_contrasts, summarize, write_summary_csv, AgentClass, Grouping,
    SummaryRow, TestKind,
};
use counterfax_core::{jsonl, AnalogyProblem, LetterString, TransformationType};
use serde::{Deserialize, Serialize};

use crate::{
    registry, Command, EvalArgs, EvalMode, ExportArgs, GenArgs, ScoreArgs, SolveArgs, StatsArgs, EXIT_OK,
    EXIT_PARTIAL,
};

pub(crate) async fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Eval(a) => eval(a).await,
        Command::Score(a) => score(a),
        Command::Stats(a) => stats(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => crate::serve::serve(a).await.map(|_| EXIT_OK),
    }
}

fn load_problems(path: &Path) -> Result<Vec<AnalogyProblem>> {
    read_problems(path).with_context(|| format!("reading problems from {}", path.display()))
}

fn load_records(path: &Path) -> Result<Vec<ResponseRecord>> {
    jsonl::read(path).with_context(|| format!("reading responses from {}", path.display()))
}

fn gen(args: GenArgs) -> Result<i32> {
    let alphabet = args.alphabet.0;
    let problems = generate_problem_set(&alphabet, args.per_cell as usize, &args.intervals, args.seed)?;
    write_problems(&args.out, &problems, args.export)?;
    eprintln!("wrote {} problems to {}", problems.len(), args.out.display());
    Ok(EXIT_OK)
}

fn solve_cmd(args: SolveArgs) -> Result<i32> {
    let alphabets = registry(&args.alphabet);
    let mut problems = load_problems(&args.problems)?;
    let mut failures = Vec::new();
    for p in problems.iter_mut() {
        let Some(alphabet) = alphabets.get(&p.alphabet_id) else {
            failures.push(format!("{}: unknown alphabet {:?}", p.id, p.alphabet_id));
            continue;
        };
        match solve(p, alphabet) {
            Ok(answer) => {
                if let Some(stored) = &p.answer {
                    if *stored != answer {
                        failures.push(format!("{}: stored answer {stored} but the rule gives {answer}", p.id));
                    }
                }
                p.answer = Some(answer);
            }
            Err(e) => failures.push(format!("{}: {e}", p.id)),
        }
    }
    write_problems(&args.out, &problems, ExportMode::Full)?;
    for f in &failures {
        eprintln!("{f}");
    }
    eprintln!("solved {} problems, {} failed verification", problems.len(), failures.len());
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

async fn eval(args: EvalArgs) -> Result<i32> {
    let alphabets = registry(&args.alphabet);
    let problems = load_problems(&args.problems)?;
    let mode = match args.mode {
        EvalMode::Tool => PromptMode::ToolAugmented,
        _ => PromptMode::Plain,
    };
    let is_mock = matches!(args.mode, EvalMode::Mock(_));
    let engine = if is_mock {
        args.agent_id.clone().unwrap_or_else(|| "mock".into())
    } else {
        args.engine.clone()
    };
    let mut endpoint = ModelEndpoint::new(engine, mode);
    endpoint.base_url = args.base_url.clone();
    endpoint.auth_env = args.auth_env.clone();
    endpoint.max_retries = args.max_retries;
    endpoint.parallelism = args.parallel as usize;
    endpoint.requests_per_minute = (args.rpm > 0 && !is_mock).then_some(args.rpm);

    let model: Box<dyn ChatModel> = match &args.mode {
        EvalMode::Mock(policy) => Box::new(MockModel::new(policy.clone(), args.seed, alphabets.clone())),
        _ => Box::new(OpenAiChat::from_env(endpoint.clone())?),
    };
    let set_name = args.problems.display().to_string();
    let mut run = evaluate(&problems, &alphabets, &endpoint, model.as_ref(), &set_name).await?;
    if let Some(id) = &args.agent_id {
        for r in &mut run.records {
            r.agent_id = id.clone();
        }
    }
    jsonl::write_atomic(&args.out, &run.records)?;
    if let Some(path) = &args.run_out {
        let json = serde_json::to_vec_pretty(&run)?;
        jsonl::write_bytes_atomic(path, &json)?;
    }
    let failures = run.transport_failures();
    eprintln!(
        "wrote {} responses to {} ({} transport failures)",
        run.records.len(),
        args.out.display(),
        failures
    );
    Ok(if failures == 0 { EXIT_OK } else { EXIT_PARTIAL })
}

/// One manual-review line. `answer` replaces the parsed answer and is
/// classified as usual; `correct` alone forces the accuracy outcome.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub problem_id: String,
    #[serde(default)]
    pub agent_id: Option<String>,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(default)]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReviewEntry {
    fn matches(&self, r: &ResponseRecord) -> bool {
        self.problem_id == r.problem_id && self.agent_id.as_ref().is_none_or(|a| *a == r.agent_id)
    }
}

fn score(args: ScoreArgs) -> Result<i32> {
    let alphabets = registry(&args.alphabet);
    let problems = load_problems(&args.problems)?;
    let mut records = load_records(&args.responses)?;
    let reviews: Vec<ReviewEntry> = match &args.review {
        Some(p) => jsonl::read(p).with_context(|| format!("reading review file {}", p.display()))?,
        None => Vec::new(),
    };
    let unmatched: Vec<&str> = reviews
        .iter()
        .filter(|rev| !records.iter().any(|r| rev.matches(r)))
        .map(|rev| rev.problem_id.as_str())
        .collect();
    if !unmatched.is_empty() {
        bail!("review entries match no response: {}", unmatched.join(", "));
    }
    for r in &mut records {
        r.parsed = None;
        r.verdict = None;
        if let Some(answer) = reviews.iter().rev().find(|rev| rev.matches(r)).and_then(|rev| rev.answer.as_ref()) {
            r.parsed = Some(
                answer
                    .parse::<LetterString>()
                    .ok()
                    .or_else(|| parse_answer(answer))
                    .with_context(|| format!("review answer {answer:?} for {} is not a letter string", r.problem_id))?,
            );
        }
    }
    let options = ClassifyOptions {
        unparseable_as_error: args.unparseable_as_error,
    };
    score_records(&problems, |id| alphabets.get(id), &mut records, options)?;
    for r in &mut records {
        let forced = reviews
            .iter()
            .rev()
            .find(|rev| rev.matches(r) && rev.answer.is_none())
            .and_then(|rev| rev.correct);
        match (forced, &r.verdict) {
            (Some(true), _) => r.verdict = Some(Verdict::Correct),
            (Some(false), Some(Verdict::Correct)) => r.verdict = Some(Verdict::Invalid),
            _ => {}
        }
    }
    jsonl::write_atomic(&args.out, &records)?;

    let mut by_agent: BTreeMap<&str, Vec<ResponseRecord>> = BTreeMap::new();
    for r in &records {
        by_agent.entry(&r.agent_id).or_default().push(r.clone());
    }
    let mut text = String::new();
    let mut csv = String::from("agent,interval,transformation,valid_alt,errors,literal_copy,unparseable,records\n");
    for (agent, rs) in &by_agent {
        let table = tabulate_valid_errors(rs, &problems)?;
        let correct = rs.iter().filter(|r| r.verdict.as_ref().is_some_and(Verdict::is_correct)).count();
        writeln!(text, "Agent: {agent} (accuracy {correct}/{})", rs.len())?;
        writeln!(text, "{table}\n")?;
        append_table_csv(&mut csv, agent, &table);
    }
    print!("{text}");
    if let Some(path) = &args.tables {
        jsonl::write_bytes_atomic(path, text.as_bytes())?;
    }
    if let Some(path) = &args.tables_csv {
        jsonl::write_bytes_atomic(path, csv.as_bytes())?;
    }
    eprintln!("wrote {} verdicts to {}", records.len(), args.out.display());
    Ok(EXIT_OK)
}

fn append_table_csv(csv: &mut String, agent: &str, table: &ValidErrorTable) {
    for ((interval, t), c) in &table.cells {
        let _ = writeln!(
            csv,
            "{agent},{interval},{},{},{},{},{},{}",
            t.as_str(),
            c.valid_alt,
            c.errors,
            c.literal_copy,
            c.unparseable,
            c.records
        );
    }
}

fn render_summary(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<24}{:>9}{:<18}{:>9}{:>8}  {}\n",
        "agent", "interval", "  transformation", "accuracy", "n", "uncertainty"
    );
    for r in rows {
        let u = &r.summary;
        let unc = match (u.sem, u.ci_low, u.ci_high) {
            (Some(sem), _, _) => format!("SEM {sem:.4} ({} participants)", u.n_participants.unwrap_or(0)),
            (None, Some(lo), Some(hi)) => format!("CI [{lo:.4}, {hi:.4}]"),
            _ => "-".into(),
        };
        let _ = writeln!(
            s,
            "{:<24}{:>9}  {:<16}{:>9.4}{:>8}  {unc}",
            r.agent,
            r.interval,
            r.transformation.map(TransformationType::as_str).unwrap_or("all"),
            u.mean,
            u.n_trials
        );
    }
    s
}

fn stats(args: StatsArgs) -> Result<i32> {
    let problems = load_problems(&args.problems)?;
    let records = load_records(&args.verdicts)?;
    let mut rows = rows_from_records(&problems, &records)?;
    let present: BTreeSet<String> = rows
        .iter()
        .filter_map(|r| match &r.agent {
            AgentClass::Model(m) => Some(m.clone()),
            AgentClass::Human => None,
        })
        .collect();
    let models: Vec<String> = if args.model.is_empty() {
        present.iter().cloned().collect()
    } else {
        let missing: Vec<&String> = args.model.iter().filter(|m| !present.contains(*m)).collect();
        if !missing.is_empty() {
            bail!("no verdicts for model(s): {}", missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "));
        }
        rows.retain(|r| match &r.agent {
            AgentClass::Model(m) => args.model.contains(m),
            AgentClass::Human => true,
        });
        args.model.clone()
    };
    let grouping = if args.by_transformation {
        Grouping::IntervalTransformation
    } else {
        Grouping::Interval
    };
    let summary = summarize(&rows, grouping, args.ci_method, args.level)?;
    write_summary_csv(&args.out, &summary)?;
    print!("{}", render_summary(&summary));
    if let Some(path) = &args.regressions {
        let test = if args.lr_test { TestKind::LikelihoodRatio } else { TestKind::Wald };
        let report = format_report(&standard_contrasts(&rows, &models, test));
        jsonl::write_bytes_atomic(path, report.as_bytes())?;
        eprintln!("wrote regressions to {}", path.display());
    }
    eprintln!("wrote {} summary rows to {}", summary.len(), args.out.display());
    Ok(EXIT_OK)
}

fn export(args: ExportArgs) -> Result<i32> {
    let problems = load_problems(&args.problems)?;
    let records = load_records(&args.responses)?;
    let by_id: HashMap<&str, &AnalogyProblem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut md = String::from("# Transcripts for review\n\n");
    let mut template = Vec::new();
    for r in &records {
        let p = by_id
            .get(r.problem_id.as_str())
            .with_context(|| format!("response for unknown problem {}", r.problem_id))?;
        writeln!(md, "## {} / {}\n", r.problem_id, r.agent_id)?;
        writeln!(md, "- problem: `{} {} / {} [ ? ]`", p.source_a, p.source_b, p.target_a)?;
        if let Some(a) = &p.answer {
            writeln!(md, "- answer key: `{a}`")?;
        }
        let parsed = r.parsed.clone().or_else(|| parse_answer(&r.raw_text));
        writeln!(md, "- parsed answer: {}", parsed.as_ref().map_or("none".to_string(), |a| format!("`{a}`")))?;
        if let Some(v) = &r.verdict {
            writeln!(md, "- verdict: {}", v.label())?;
        }
        writeln!(md, "- retries: {}", r.retries)?;
        if let Some(e) = &r.error {
            writeln!(md, "- error: {e}")?;
        }
        md.push('\n');
        for m in &r.transcript {
            writeln!(md, "### {}\n\n````text\n{}\n````\n", m.role, m.content)?;
        }
        template.push(ReviewEntry {
            problem_id: r.problem_id.clone(),
            agent_id: Some(r.agent_id.clone()),
            answer: parsed.map(|a| a.to_string()),
            correct: None,
            note: None,
        });
    }
    jsonl::write_bytes_atomic(&args.out, md.as_bytes())?;
    if let Some(path) = &args.review_template {
        jsonl::write_atomic(path, &template)?;
    }
    eprintln!("exported {} transcripts to {}", records.len(), args.out.display());
    Ok(EXIT_OK)
}
