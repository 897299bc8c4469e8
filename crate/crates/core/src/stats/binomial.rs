use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    /// Exact interval from beta quantiles.
    #[default]
    ClopperPearson,
    Wilson,
}

impl std::str::FromStr for CiMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clopper-pearson" | "clopper_pearson" | "exact" => Ok(CiMethod::ClopperPearson),
            "wilson" => Ok(CiMethod::Wilson),
            other => Err(format!("unknown CI method {other:?} (clopper-pearson|wilson)")),
        }
    }
}

/// Standard normal CDF, via the complementary error function so that the
/// far tail keeps its relative precision.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided p-value for a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn normal_quantile(p: f64) -> f64 {
    // bisection on the CDF; only used for Wilson's z
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Quantile of Beta(a, b): solves I_x(a, b) = p by bisection.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check(successes: u64, trials: u64, level: f64) -> Result<(), StatsError> {
    if trials == 0 {
        return Err(StatsError::Domain("binomial interval needs at least one trial".into()));
    }
    if successes > trials {
        return Err(StatsError::Domain(format!("{successes} successes out of {trials} trials")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Clopper-Pearson exact interval.
pub fn binomial_ci(successes: u64, trials: u64, level: f64) -> Result<(f64, f64), StatsError> {
    check(successes, trials, level)?;
    let alpha = 1.0 - level;
    let (k, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, k, n - k + 1.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, k + 1.0, n - k)
    };
    Ok((low, high))
}

pub fn wilson_ci(successes: u64, trials: u64, level: f64) -> Result<(f64, f64), StatsError> {
    check(successes, trials, level)?;
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}

pub fn interval(method: CiMethod, successes: u64, trials: u64, level: f64) -> Result<(f64, f64), StatsError> {
    match method {
        CiMethod::ClopperPearson => binomial_ci(successes, trials, level),
        CiMethod::Wilson => wilson_ci(successes, trials, level),
    }
}

/// Standard error of the mean: sample sd (n - 1) over sqrt(n).
pub fn sem_across_participants(values: &[f64]) -> Result<f64, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::Domain(format!("SEM needs at least 2 values, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (nf - 1.0)).sqrt() / nf.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cp_edge_cases() {
        let (lo, hi) = binomial_ci(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.308_497_2).abs() < 1e-6, "{hi}");
        let (lo, hi) = binomial_ci(10, 10, 0.95).unwrap();
        assert!((lo - 0.691_502_8).abs() < 1e-6, "{lo}");
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn cp_domain_errors() {
        assert!(binomial_ci(3, 0, 0.95).is_err());
        assert!(binomial_ci(11, 10, 0.95).is_err());
        assert!(binomial_ci(1, 10, 1.0).is_err());
    }

    #[test]
    fn wilson_is_inside_unit_interval() {
        let (lo, hi) = wilson_ci(5, 10, 0.95).unwrap();
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4, "{lo} {hi}");
    }

    #[test]
    fn sem_examples() {
        let s = sem_across_participants(&[0.0, 0.5, 1.0]).unwrap();
        assert!((s - 0.5 / 3f64.sqrt()).abs() < 1e-12);
        assert!(sem_across_participants(&[0.7, 0.7, 0.7]).unwrap() < 1e-15);
        assert!(sem_across_participants(&[1.0]).is_err());
    }

    #[test]
    fn normal_tails() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-10);
        // deep tail keeps relative precision
        let p = two_sided_p(9.0);
        assert!((p / 2.257_176_811_907_681e-19 - 1.0).abs() < 1e-9, "{p}");
    }
}
