//! Answer extraction, verdicts and the valid-alternative error tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::alphabet::PermutedAlphabet;
use crate::error::{OracleError, StatsError};
use crate::harness::ChatMessage;
use crate::oracle::{apply_rule, induce_rules, intended_rule, solve, Rule};
use crate::problem::{AnalogyProblem, IntervalSize, LetterString, TransformationType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Human,
    #[default]
    Model,
}

/// One agent's answer to one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub problem_id: String,
    /// Participant code for humans, engine name for models.
    pub agent_id: String,
    #[serde(default)]
    pub agent_kind: AgentKind,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<LetterString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default)]
    pub transcript: Vec<ChatMessage>,
    #[serde(default)]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_ms: Option<u64>,
}

impl ResponseRecord {
    pub fn new(problem_id: impl Into<String>, agent_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        ResponseRecord {
            problem_id: problem_id.into(),
            agent_id: agent_id.into(),
            agent_kind: AgentKind::Model,
            raw_text: raw_text.into(),
            parsed: None,
            verdict: None,
            transcript: Vec::new(),
            retries: 0,
            error: None,
            submitted_at: None,
            response_ms: None,
        }
    }

    pub fn human(mut self) -> Self {
        self.agent_kind = AgentKind::Human;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    /// Wrong answer explained by at least one non-intended rule that also
    /// maps source A to source B. Carries every matching rule.
    ValidAlternative { rules: Vec<Rule> },
    Invalid,
    Unparseable,
}

impl Verdict {
    pub fn is_correct(&self) -> bool {
        matches!(self, Verdict::Correct)
    }

    /// Counts as an error in the valid-error tables.
    pub fn is_error(&self) -> bool {
        matches!(self, Verdict::ValidAlternative { .. } | Verdict::Invalid)
    }

    /// The only explanation is a verbatim copy of source B.
    pub fn is_literal_copy(&self) -> bool {
        match self {
            Verdict::ValidAlternative { rules } => rules.iter().all(Rule::is_literal_copy),
            _ => false,
        }
    }

    pub fn rule_kinds(&self) -> BTreeSet<&'static str> {
        match self {
            Verdict::ValidAlternative { rules } => rules.iter().map(Rule::kind_name).collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Correct => "correct",
            Verdict::ValidAlternative { .. } => "valid_alternative",
            Verdict::Invalid => "invalid",
            Verdict::Unparseable => "unparseable",
        }
    }
}

fn letter_token(tok: &str) -> Option<char> {
    let mut chars = tok.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_lowercase()),
        _ => None,
    }
}

fn split_tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | '\'' | '"' | '`'))
        .filter(|t| !t.is_empty())
}

/// Extracts the answer letters from free text: the last bracketed group of
/// single letters, else the last run of at least three single-letter words.
pub fn parse_answer(raw_text: &str) -> Option<LetterString> {
    let mut last_group = None;
    let mut rest = raw_text;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        let Some(close) = after.find(']') else { break };
        let inner = &after[..close];
        // a nested '[' means this group was not closed; restart from it
        if let Some(nested) = inner.rfind('[') {
            rest = &after[nested..];
            continue;
        }
        let letters: Option<Vec<char>> = split_tokens(inner).map(letter_token).collect();
        if let Some(letters) = letters.filter(|l| !l.is_empty()) {
            last_group = Some(LetterString(letters));
        }
        rest = &after[close + 1..];
    }
    if last_group.is_some() {
        return last_group;
    }

    let mut best: Option<Vec<char>> = None;
    let mut run: Vec<char> = Vec::new();
    for tok in split_tokens(raw_text) {
        let trimmed = tok.trim_matches(|c: char| c.is_ascii_punctuation());
        match letter_token(trimmed) {
            Some(c) => run.push(c),
            None => {
                if run.len() >= 3 {
                    best = Some(std::mem::take(&mut run));
                }
                run.clear();
            }
        }
    }
    if run.len() >= 3 {
        best = Some(run);
    }
    best.map(LetterString)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClassifyOptions {
    /// Fold unparseable answers into `Invalid`.
    pub unparseable_as_error: bool,
}

/// Assigns a verdict to `parsed` (or `None` when parsing failed).
pub fn classify_parsed(
    problem: &AnalogyProblem,
    alphabet: &PermutedAlphabet,
    parsed: Option<&LetterString>,
    options: ClassifyOptions,
) -> Result<Verdict, OracleError> {
    let Some(parsed) = parsed else {
        return Ok(if options.unparseable_as_error {
            Verdict::Invalid
        } else {
            Verdict::Unparseable
        });
    };
    let answer = match &problem.answer {
        Some(a) => a.clone(),
        None => solve(problem, alphabet)?,
    };
    if *parsed == answer {
        return Ok(Verdict::Correct);
    }
    let intended = intended_rule(problem);
    let matches: Vec<Rule> = induce_rules(alphabet, &problem.source_a, &problem.source_b)
        .into_iter()
        .filter(|r| *r != intended && !r.is_literal_copy())
        .filter(|r| apply_rule(r, alphabet, &problem.target_a).as_ref() == Some(parsed))
        .collect();
    if !matches.is_empty() {
        return Ok(Verdict::ValidAlternative { rules: matches });
    }
    if *parsed == problem.source_b {
        return Ok(Verdict::ValidAlternative {
            rules: vec![Rule::LiteralCopy {
                output: problem.source_b.clone(),
            }],
        });
    }
    Ok(Verdict::Invalid)
}

/// Parses (unless a parsed answer is already attached) and classifies.
pub fn classify(
    problem: &AnalogyProblem,
    alphabet: &PermutedAlphabet,
    record: &ResponseRecord,
    options: ClassifyOptions,
) -> Result<Verdict, OracleError> {
    let parsed = record.parsed.clone().or_else(|| parse_answer(&record.raw_text));
    classify_parsed(problem, alphabet, parsed.as_ref(), options)
}

/// Fills `parsed` and `verdict` on every record. Records whose problem is
/// unknown are reported together.
pub fn score_records<'a, F>(
    problems: &[AnalogyProblem],
    alphabet_for: F,
    records: &mut [ResponseRecord],
    options: ClassifyOptions,
) -> Result<(), ScoreError>
where
    F: Fn(&str) -> Option<&'a PermutedAlphabet>,
{
    let by_id: HashMap<&str, &AnalogyProblem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let orphans: Vec<String> = records
        .iter()
        .filter(|r| !by_id.contains_key(r.problem_id.as_str()))
        .map(|r| r.problem_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !orphans.is_empty() {
        return Err(ScoreError::Join(StatsError::MissingJoin(orphans)));
    }
    for record in records.iter_mut() {
        let problem = by_id[record.problem_id.as_str()];
        let alphabet = alphabet_for(&problem.alphabet_id)
            .ok_or_else(|| ScoreError::UnknownAlphabet(problem.alphabet_id.clone()))?;
        if record.parsed.is_none() {
            record.parsed = parse_answer(&record.raw_text);
        }
        record.verdict = Some(classify(problem, alphabet, record, options)?);
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error(transparent)]
    Join(StatsError),
    #[error("no alphabet registered for id {0:?}")]
    UnknownAlphabet(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ErrorCell {
    pub valid_alt: usize,
    pub errors: usize,
    /// Errors whose only explanation is copying source B; counted in
    /// `errors` but not in `valid_alt`.
    pub literal_copy: usize,
    /// Number of valid-alternative errors matched by each rule kind.
    pub by_kind: BTreeMap<String, usize>,
    pub unparseable: usize,
    pub records: usize,
}

impl ErrorCell {
    /// `k\n` rendering used in the tables.
    pub fn fraction_cell(&self) -> String {
        format!("{}\\{}", self.valid_alt, self.errors)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidErrorTable {
    pub cells: BTreeMap<(IntervalSize, TransformationType), ErrorCell>,
}

impl ValidErrorTable {
    pub fn totals(&self) -> ErrorCell {
        let mut t = ErrorCell::default();
        for c in self.cells.values() {
            t.valid_alt += c.valid_alt;
            t.errors += c.errors;
            t.literal_copy += c.literal_copy;
            t.unparseable += c.unparseable;
            t.records += c.records;
            for (k, n) in &c.by_kind {
                *t.by_kind.entry(k.clone()).or_default() += n;
            }
        }
        t
    }

    /// Overall valid-alternative share of errors; `None` with no errors.
    pub fn overall_fraction(&self) -> Option<f64> {
        let t = self.totals();
        (t.errors > 0).then(|| t.valid_alt as f64 / t.errors as f64)
    }

    /// `46% (23/50)`, or `–` when there were no errors.
    pub fn overall_label(&self) -> String {
        let t = self.totals();
        match self.overall_fraction() {
            Some(f) => format!("{:.0}% ({}/{})", f * 100.0, t.valid_alt, t.errors),
            None => "–".to_string(),
        }
    }

    pub fn intervals(&self) -> BTreeSet<IntervalSize> {
        self.cells.keys().map(|(i, _)| *i).collect()
    }
}

impl fmt::Display for ValidErrorTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for interval in self.intervals() {
            writeln!(f, "Fraction of errors involving valid alternative rules, interval size = {interval}")?;
            writeln!(f, "{:<26}Valid errors", "Transformation type")?;
            for t in TransformationType::ALL {
                let cell = self.cells.get(&(interval, t)).cloned().unwrap_or_default();
                writeln!(f, "{:<26}{}", t.display_name(), cell.fraction_cell())?;
            }
            writeln!(f)?;
        }
        write!(f, "Overall: {}", self.overall_label())
    }
}

/// Builds the per-cell valid-error counts. Every transformation type gets a
/// row for each interval that appears among the scored records.
pub fn tabulate_valid_errors(
    records: &[ResponseRecord],
    problems: &[AnalogyProblem],
) -> Result<ValidErrorTable, StatsError> {
    let by_id: HashMap<&str, &AnalogyProblem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut table = ValidErrorTable::default();
    let mut orphans = BTreeSet::new();
    for record in records {
        let Some(problem) = by_id.get(record.problem_id.as_str()) else {
            orphans.insert(record.problem_id.clone());
            continue;
        };
        let Some(verdict) = &record.verdict else {
            return Err(StatsError::Domain(format!(
                "record for {} has not been classified",
                record.problem_id
            )));
        };
        if !table.cells.keys().any(|(i, _)| *i == problem.interval) {
            for t in TransformationType::ALL {
                table.cells.insert((problem.interval, t), ErrorCell::default());
            }
        }
        let cell = table
            .cells
            .get_mut(&(problem.interval, problem.transformation))
            .expect("row inserted above");
        cell.records += 1;
        match verdict {
            Verdict::Unparseable => cell.unparseable += 1,
            Verdict::Correct => {}
            Verdict::Invalid => cell.errors += 1,
            v @ Verdict::ValidAlternative { .. } => {
                cell.errors += 1;
                if v.is_literal_copy() {
                    cell.literal_copy += 1;
                } else {
                    cell.valid_alt += 1;
                    for kind in v.rule_kinds() {
                        *cell.by_kind.entry(kind.to_string()).or_default() += 1;
                    }
                }
            }
        }
    }
    if !orphans.is_empty() {
        return Err(StatsError::MissingJoin(orphans.into_iter().collect()));
    }
    Ok(table)
}
