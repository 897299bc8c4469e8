//! Accuracy summaries, binomial intervals and trial-level logistic
//! regression.

mod aggregate;
mod binomial;
mod logistic;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use aggregate::{summarize, write_summary_csv, AccuracySummary, Grouping, SummaryRow};
pub use binomial::{
    beta_quantile, binomial_ci, interval, normal_cdf, sem_across_participants, two_sided_p, wilson_ci, CiMethod,
};
pub use logistic::{
    design, fit_design, fit_logistic, fit_logistic_with, format_p, log_likelihood, Predictor, RegressionFit,
    RegressionSpec, TestKind, MAX_ITERATIONS, PROBABILITY_FLOOR, TOLERANCE,
};

use crate::classify::{AgentKind, ResponseRecord};
use crate::error::StatsError;
use crate::problem::{AnalogyProblem, IntervalSize, TransformationType};

/// Who produced a trial: pooled humans, or a model identified by label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentClass {
    Human,
    Model(String),
}

impl AgentClass {
    pub fn is_human(&self) -> bool {
        matches!(self, AgentClass::Human)
    }
}

impl fmt::Display for AgentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentClass::Human => f.write_str("human"),
            AgentClass::Model(m) => f.write_str(m),
        }
    }
}

impl std::str::FromStr for AgentClass {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if s.eq_ignore_ascii_case("human") {
            AgentClass::Human
        } else {
            AgentClass::Model(s.to_string())
        })
    }
}

/// One scored trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRow {
    pub agent: AgentClass,
    /// Set for humans; accuracy is averaged per participant.
    pub participant_id: Option<String>,
    pub interval: IntervalSize,
    pub transformation: TransformationType,
    pub correct: bool,
}

/// Joins classified records to their problems. Unparseable answers count as
/// incorrect. Every record must have a verdict and a matching problem.
pub fn rows_from_records(
    problems: &[AnalogyProblem],
    records: &[ResponseRecord],
) -> Result<Vec<TrialRow>, StatsError> {
    let by_id: HashMap<&str, &AnalogyProblem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut missing: Vec<String> = records
        .iter()
        .filter(|r| !by_id.contains_key(r.problem_id.as_str()))
        .map(|r| r.problem_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(StatsError::MissingJoin(missing));
    }
    records
        .iter()
        .map(|r| {
            let p = by_id[r.problem_id.as_str()];
            let verdict = r.verdict.as_ref().ok_or_else(|| {
                StatsError::Domain(format!("record for {} by {} has not been classified", r.problem_id, r.agent_id))
            })?;
            let (agent, participant_id) = match r.agent_kind {
                AgentKind::Human => (AgentClass::Human, Some(r.agent_id.clone())),
                AgentKind::Model => (AgentClass::Model(r.agent_id.clone()), None),
            };
            Ok(TrialRow {
                agent,
                participant_id,
                interval: p.interval,
                transformation: p.transformation,
                correct: verdict.is_correct(),
            })
        })
        .collect()
}

/// One named regression in a report; failures (separation, empty cells)
/// are kept so the report can say why a model was not fitted.
#[derive(Debug)]
pub struct NamedFit {
    pub name: String,
    pub fit: Result<RegressionFit, StatsError>,
}

/// The standard set of comparisons: the interval effect within each agent,
/// then humans against each model with an interaction term.
pub fn standard_contrasts(rows: &[TrialRow], models: &[String], test: TestKind) -> Vec<NamedFit> {
    let mut agents: Vec<AgentClass> = Vec::new();
    if rows.iter().any(|r| r.agent.is_human()) {
        agents.push(AgentClass::Human);
    }
    agents.extend(models.iter().cloned().map(AgentClass::Model));
    let mut out = Vec::new();
    for agent in &agents {
        let own: Vec<TrialRow> = rows.iter().filter(|r| r.agent == *agent).cloned().collect();
        out.push(NamedFit {
            name: format!("{agent}: interval size"),
            fit: fit_logistic_with(&own, &RegressionSpec::interval_only(), test),
        });
    }
    if agents.first() == Some(&AgentClass::Human) {
        for model in &agents[1..] {
            out.push(NamedFit {
                name: format!("human vs {model}: interval, agent, interaction"),
                fit: fit_logistic_with(rows, &RegressionSpec::contrast(AgentClass::Human, model.clone()), test),
            });
        }
    }
    out
}

pub fn format_report(fits: &[NamedFit]) -> String {
    let mut s = String::new();
    for f in fits {
        s.push_str(&format!("== {}\n", f.name));
        match &f.fit {
            Ok(fit) => s.push_str(&format!("{fit}\n\n")),
            Err(e) => s.push_str(&format!("not fitted: {e}\n\n")),
        }
    }
    s
}
