//! Trial-level logistic regression fitted by iteratively reweighted least
//! squares, with Wald (default) or likelihood-ratio tests.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::binomial::two_sided_p;
use super::{AgentClass, TrialRow};
use crate::error::StatsError;
use crate::problem::IntervalSize;

pub const MAX_ITERATIONS: usize = 50;
pub const TOLERANCE: f64 = 1e-8;
/// Fitted probabilities beyond this distance from 0 or 1 while the
/// coefficients are still moving indicate separation.
pub const PROBABILITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predictor {
    InterceptAlways,
    /// 0 for interval 1, 1 for interval 2.
    IntervalSize,
    /// 0 for the first agent (reference), 1 for the second.
    AgentContrast(AgentClass, AgentClass),
    /// Product of the interval and agent codes.
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub predictors: Vec<Predictor>,
}

impl RegressionSpec {
    /// Intercept plus interval size, for one agent's data.
    pub fn interval_only() -> Self {
        RegressionSpec {
            predictors: vec![Predictor::InterceptAlways, Predictor::IntervalSize],
        }
    }

    /// Interval, agent contrast and their interaction.
    pub fn contrast(reference: AgentClass, other: AgentClass) -> Self {
        RegressionSpec {
            predictors: vec![
                Predictor::InterceptAlways,
                Predictor::IntervalSize,
                Predictor::AgentContrast(reference, other),
                Predictor::Interaction,
            ],
        }
    }

    fn contrast_pair(&self) -> Option<(&AgentClass, &AgentClass)> {
        self.predictors.iter().find_map(|p| match p {
            Predictor::AgentContrast(a, b) => Some((a, b)),
            _ => None,
        })
    }

    fn has(&self, pred: &Predictor) -> bool {
        self.predictors.contains(pred)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.has(&Predictor::Interaction) && !(self.has(&Predictor::IntervalSize) && self.contrast_pair().is_some()) {
            return Err(StatsError::Domain(
                "interaction requires both interval and agent main effects".into(),
            ));
        }
        if let Some((a, b)) = self.contrast_pair() {
            if a == b {
                return Err(StatsError::Domain(format!("agent contrast compares {a} with itself")));
            }
        }
        Ok(())
    }

    /// Term names in column order (the intercept is always first).
    pub fn term_names(&self) -> Vec<String> {
        let mut names = vec!["(Intercept)".to_string()];
        let contrast = self.contrast_pair();
        if self.has(&Predictor::IntervalSize) {
            names.push("interval2".into());
        }
        if let Some((_, b)) = contrast {
            names.push(format!("agent[{b}]"));
        }
        if let (true, Some((_, b))) = (self.has(&Predictor::Interaction), contrast) {
            names.push(format!("interval2:agent[{b}]"));
        }
        names
    }
}

/// Builds the 0/1 design matrix and response for `spec`, keeping only rows
/// of the contrasted agents when the regression has a contrast.
pub fn design(rows: &[TrialRow], spec: &RegressionSpec) -> Result<(DMatrix<f64>, DVector<f64>), StatsError> {
    spec.validate()?;
    let contrast = spec.contrast_pair();
    let use_interval = spec.has(&Predictor::IntervalSize);
    let use_inter = spec.has(&Predictor::Interaction);
    let kept: Vec<&TrialRow> = rows
        .iter()
        .filter(|r| contrast.is_none_or(|(a, b)| r.agent == *a || r.agent == *b))
        .collect();

    // every cell the design distinguishes must be populated
    let interval_levels: &[u8] = if use_interval { &[1, 2] } else { &[] };
    let mut cells: Vec<(Option<u8>, Option<&AgentClass>)> = Vec::new();
    match (use_interval, contrast) {
        (true, Some((a, b))) => {
            for &i in interval_levels {
                cells.push((Some(i), Some(a)));
                cells.push((Some(i), Some(b)));
            }
        }
        (true, None) => cells.extend(interval_levels.iter().map(|&i| (Some(i), None))),
        (false, Some((a, b))) => cells.extend([(None, Some(a)), (None, Some(b))]),
        (false, None) => cells.push((None, None)),
    }
    for (interval, agent) in cells {
        let any = kept.iter().any(|r| {
            interval.is_none_or(|i| r.interval.get() == i) && agent.is_none_or(|a| r.agent == *a)
        });
        if !any {
            let label = format!(
                "interval={} agent={}",
                interval.map_or("*".to_string(), |i| i.to_string()),
                agent.map_or("*".to_string(), |a| a.to_string())
            );
            return Err(StatsError::EmptyCell(label));
        }
    }

    let cols = spec.term_names().len();
    let mut x = DMatrix::zeros(kept.len(), cols);
    let mut y = DVector::zeros(kept.len());
    for (n, r) in kept.iter().enumerate() {
        let iv = if r.interval == IntervalSize::TWO { 1.0 } else { 0.0 };
        let ag = match contrast {
            Some((_, b)) if r.agent == *b => 1.0,
            _ => 0.0,
        };
        let mut c = 0;
        x[(n, c)] = 1.0;
        c += 1;
        if use_interval {
            x[(n, c)] = iv;
            c += 1;
        }
        if contrast.is_some() {
            x[(n, c)] = ag;
            c += 1;
        }
        if use_inter && contrast.is_some() {
            x[(n, c)] = iv * ag;
        }
        y[n] = if r.correct { 1.0 } else { 0.0 };
    }
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[default]
    Wald,
    LikelihoodRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub wald_z: Vec<f64>,
    /// Two-sided; from the test named in `test`.
    pub p_values: Vec<f64>,
    pub test: TestKind,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub n_obs: usize,
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(e, yi)| yi * e - softplus(*e)).sum()
}

fn rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > max * 1e-10 * x.nrows().max(x.ncols()) as f64).count()
}

fn information(x: &DMatrix<f64>, p: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (n, mut row) in xw.row_iter_mut().enumerate() {
        row *= p[n] * (1.0 - p[n]);
    }
    x.transpose() * xw
}

/// IRLS on an explicit design. Stops when the largest coefficient change
/// falls below [`TOLERANCE`] or after [`MAX_ITERATIONS`].
pub fn fit_design(x: &DMatrix<f64>, y: &DVector<f64>, terms: Vec<String>) -> Result<RegressionFit, StatsError> {
    let (n, k) = x.shape();
    if n == 0 {
        return Err(StatsError::Domain("no observations".into()));
    }
    let r = rank(x);
    if r < k {
        return Err(StatsError::RankDeficient { rank: r, columns: k });
    }
    let mut beta = DVector::zeros(k);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let p = (x * &beta).map(sigmoid);
        let info = information(x, &p);
        let score = x.transpose() * (y - &p);
        let step = info
            .cholesky()
            .ok_or(StatsError::SeparationDetected { iterations })?
            .solve(&score);
        beta += &step;
        let delta = step.amax();
        if !delta.is_finite() {
            return Err(StatsError::SeparationDetected { iterations });
        }
        if delta < TOLERANCE {
            converged = true;
            break;
        }
        let fitted = (x * &beta).map(sigmoid);
        if fitted.iter().any(|&q| !(PROBABILITY_FLOOR..=1.0 - PROBABILITY_FLOOR).contains(&q)) {
            return Err(StatsError::SeparationDetected { iterations });
        }
    }

    let p = (x * &beta).map(sigmoid);
    let cov = information(x, &p)
        .try_inverse()
        .ok_or(StatsError::RankDeficient { rank: r, columns: k })?;
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].sqrt()).collect();
    let z: Vec<f64> = (0..k).map(|j| beta[j] / se[j]).collect();
    Ok(RegressionFit {
        terms,
        coefficients: beta.iter().copied().collect(),
        standard_errors: se,
        p_values: z.iter().map(|z| two_sided_p(*z)).collect(),
        wald_z: z,
        test: TestKind::Wald,
        converged,
        iterations,
        log_likelihood: log_likelihood(x, y, &beta),
        n_obs: n,
    })
}

/// Replaces Wald p-values with likelihood-ratio p-values, refitting with
/// each non-intercept column dropped in turn.
fn likelihood_ratio(x: &DMatrix<f64>, y: &DVector<f64>, fit: &mut RegressionFit) -> Result<(), StatsError> {
    for j in 1..x.ncols() {
        let reduced = x.clone().remove_column(j);
        let sub = fit_design(&reduced, y, Vec::new())?;
        let stat = (2.0 * (fit.log_likelihood - sub.log_likelihood)).max(0.0);
        // chi-square(1) survival function
        fit.p_values[j] = two_sided_p(stat.sqrt());
    }
    fit.test = TestKind::LikelihoodRatio;
    Ok(())
}

pub fn fit_logistic(rows: &[TrialRow], spec: &RegressionSpec) -> Result<RegressionFit, StatsError> {
    fit_logistic_with(rows, spec, TestKind::Wald)
}

pub fn fit_logistic_with(rows: &[TrialRow], spec: &RegressionSpec, test: TestKind) -> Result<RegressionFit, StatsError> {
    let (x, y) = design(rows, spec)?;
    let mut fit = fit_design(&x, &y, spec.term_names())?;
    if test == TestKind::LikelihoodRatio {
        likelihood_ratio(&x, &y, &mut fit)?;
    }
    Ok(fit)
}

/// p-values below machine resolution print as `<2e-16`.
pub fn format_p(p: f64) -> String {
    if p < 2.2e-16 {
        "<2e-16".to_string()
    } else if p < 1e-3 {
        format!("{p:.1e}")
    } else {
        format!("{p:.3}")
    }
}

impl fmt::Display for RegressionFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28}{:>12}{:>12}{:>10}{:>12}",
            "term", "estimate", "std.err", "z", "p"
        )?;
        for j in 0..self.coefficients.len() {
            writeln!(
                f,
                "{:<28}{:>12.4}{:>12.4}{:>10.3}{:>12}",
                self.terms.get(j).map(String::as_str).unwrap_or("?"),
                self.coefficients[j],
                self.standard_errors[j],
                self.wald_z[j],
                format_p(self.p_values[j])
            )?;
        }
        write!(
            f,
            "n = {}, log-likelihood = {:.4}, iterations = {}{}, test = {:?}",
            self.n_obs,
            self.log_likelihood,
            self.iterations,
            if self.converged { "" } else { " (not converged)" },
            self.test
        )
    }
}
