use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use super::binomial::{interval, sem_across_participants, CiMethod};
use super::{AgentClass, TrialRow};
use crate::error::StatsError;
use crate::problem::{IntervalSize, TransformationType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// Agent by interval size.
    #[default]
    Interval,
    /// Agent by interval size by transformation type.
    IntervalTransformation,
}

/// Mean accuracy with its uncertainty. Humans get the mean of per-participant
/// accuracies and its SEM; models get pooled accuracy and a binomial CI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracySummary {
    pub mean: f64,
    pub n_trials: usize,
    pub n_correct: usize,
    pub n_participants: Option<usize>,
    pub sem: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub agent: String,
    pub interval: u8,
    pub transformation: Option<TransformationType>,
    #[serde(flatten)]
    pub summary: AccuracySummary,
}

type Key = (AgentClass, IntervalSize, Option<TransformationType>);

fn summarize_cell(agent: &AgentClass, rows: &[&TrialRow], method: CiMethod, level: f64) -> Result<AccuracySummary, StatsError> {
    let n_trials = rows.len();
    let n_correct = rows.iter().filter(|r| r.correct).count();
    if agent.is_human() {
        let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for r in rows {
            let pid = r.participant_id.as_deref().ok_or_else(|| {
                StatsError::Domain("human trial without a participant id".into())
            })?;
            let e = per.entry(pid).or_default();
            e.0 += r.correct as usize;
            e.1 += 1;
        }
        let accs: Vec<f64> = per.values().map(|(c, n)| *c as f64 / *n as f64).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let sem = (accs.len() >= 2).then(|| sem_across_participants(&accs)).transpose()?;
        Ok(AccuracySummary {
            mean,
            n_trials,
            n_correct,
            n_participants: Some(accs.len()),
            sem,
            ci_low: None,
            ci_high: None,
        })
    } else {
        let (lo, hi) = interval(method, n_correct as u64, n_trials as u64, level)?;
        Ok(AccuracySummary {
            mean: n_correct as f64 / n_trials as f64,
            n_trials,
            n_correct,
            n_participants: None,
            sem: None,
            ci_low: Some(lo),
            ci_high: Some(hi),
        })
    }
}

/// Summarizes accuracy per group. With `Grouping::IntervalTransformation`
/// every agent must have trials in every (interval, transformation) cell
/// that any agent has; a gap is reported as an empty cell.
pub fn summarize(
    rows: &[TrialRow],
    grouping: Grouping,
    method: CiMethod,
    level: f64,
) -> Result<Vec<SummaryRow>, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Domain("no trials to summarize".into()));
    }
    let mut groups: BTreeMap<Key, Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        let t = (grouping == Grouping::IntervalTransformation).then_some(r.transformation);
        groups.entry((r.agent.clone(), r.interval, t)).or_default().push(r);
    }
    let agents: BTreeSet<&AgentClass> = groups.keys().map(|k| &k.0).collect();
    let cells: BTreeSet<(IntervalSize, Option<TransformationType>)> = groups.keys().map(|k| (k.1, k.2)).collect();
    for agent in &agents {
        for (i, t) in &cells {
            if !groups.contains_key(&((*agent).clone(), *i, *t)) {
                return Err(StatsError::EmptyCell(format!(
                    "{agent} interval={i}{}",
                    t.map(|t| format!(" transformation={t}")).unwrap_or_default()
                )));
            }
        }
    }
    groups
        .iter()
        .map(|((agent, i, t), rs)| {
            Ok(SummaryRow {
                agent: agent.to_string(),
                interval: i.get(),
                transformation: *t,
                summary: summarize_cell(agent, rs, method, level)?,
            })
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), StatsError> {
    let mut out = String::from(
        "agent,interval,transformation,mean,n_trials,n_correct,n_participants,sem,ci_low,ci_high\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        let s = &r.summary;
        out.push_str(&format!(
            "{},{},{},{:.6},{},{},{},{},{},{}\n",
            r.agent,
            r.interval,
            r.transformation.map(|t| t.as_str()).unwrap_or(""),
            s.mean,
            s.n_trials,
            s.n_correct,
            s.n_participants.map(|n| n.to_string()).unwrap_or_default(),
            opt(s.sem),
            opt(s.ci_low),
            opt(s.ci_high)
        ));
    }
    crate::jsonl::write_bytes_atomic(path, out.as_bytes())
        .map_err(|e| StatsError::Domain(e.to_string()))
}
