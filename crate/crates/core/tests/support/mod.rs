//! Independent oracles shared by the core tests and the acceptance target.
#![allow(dead_code)]

use counterfax_core::alphabet::PermutedAlphabet;
use counterfax_core::oracle::{apply_rule, induce_rules, intended_rule, is_progression, solve};
use counterfax_core::{AnalogyProblem, LetterString, TransformationType};
use nalgebra::{DMatrix, DVector};

/// Returns a description of the first broken invariant, if any.
pub fn violation(p: &AnalogyProblem, alphabet: &PermutedAlphabet) -> Option<String> {
    let answer = p.answer.as_ref()?;
    for s in [&p.source_a, &p.source_b, &p.target_a, answer] {
        if !(4..=6).contains(&s.len()) {
            return Some(format!("length {} for {s}", s.len()));
        }
        if s.indices(alphabet).is_err() {
            return Some(format!("{s} leaves the alphabet"));
        }
    }
    let rule = intended_rule(p);
    if apply_rule(&rule, alphabet, &p.source_a).as_ref() != Some(&p.source_b) {
        return Some("intended rule does not map A to B".into());
    }
    if apply_rule(&rule, alphabet, &p.target_a).as_ref() != Some(answer) {
        return Some("intended rule does not map C to the answer".into());
    }
    if solve(p, alphabet).ok().as_ref() != Some(answer) {
        return Some("solve disagrees with the stored answer".into());
    }
    let meta = p.meta.as_ref()?;
    if meta.source.start == meta.target.start {
        return Some("source and target share a start".into());
    }
    if !induce_rules(alphabet, &p.source_a, &p.source_b).contains(&rule) {
        return Some("induced rules miss the intended rule".into());
    }
    let step = p.interval.step();
    use TransformationType::*;
    match p.transformation {
        RemoveRedundant | FixSequence | Sort => {
            for b in [&p.source_b, answer] {
                if !is_progression(alphabet, b.letters(), step) {
                    return Some(format!("{b} is not ordered at step {step}"));
                }
            }
        }
        _ => {}
    }
    match p.transformation {
        Sort => {
            if p.source_a == p.source_b || p.target_a == *answer {
                return Some("sort pair is already sorted".into());
            }
        }
        FixSequence => {
            for (a, b) in [(&p.source_a, &p.source_b), (&p.target_a, answer)] {
                let diff: Vec<usize> = (0..a.len()).filter(|&k| a.letters()[k] != b.letters()[k]).collect();
                if diff.len() != 1 {
                    return Some(format!("{a} differs from {b} at {} positions", diff.len()));
                }
                if is_progression(alphabet, a.letters(), step) {
                    return Some(format!("{a} is not out of order"));
                }
                if b.letters().contains(&a.letters()[diff[0]]) {
                    return Some(format!("distractor in {a} already occurs in {b}"));
                }
            }
        }
        _ => {}
    }
    None
}

/// Some wrong answer explained by a non-intended rule, if the problem has one.
pub fn alternative_answer(p: &AnalogyProblem, alphabet: &PermutedAlphabet) -> Option<LetterString> {
    let answer = p.answer.clone()?;
    let intended = intended_rule(p);
    induce_rules(alphabet, &p.source_a, &p.source_b)
        .into_iter()
        .filter(|r| *r != intended && !r.is_literal_copy())
        .filter_map(|r| apply_rule(&r, alphabet, &p.target_a))
        .find(|out| *out != answer && *out != p.source_b)
}

/// Scripted wrong answers per cell: (interval, type, valid, errors).
pub const SCRIPT: [(u8, TransformationType, usize, usize); 12] = {
    use TransformationType::*;
    [
        (1, ExtendSequence, 0, 0),
        (1, Successor, 0, 0),
        (1, Predecessor, 0, 2),
        (1, RemoveRedundant, 1, 1),
        (1, FixSequence, 6, 10),
        (1, Sort, 3, 7),
        (2, ExtendSequence, 0, 9),
        (2, Successor, 0, 1),
        (2, Predecessor, 0, 2),
        (2, RemoveRedundant, 0, 1),
        (2, FixSequence, 10, 10),
        (2, Sort, 3, 7),
    ]
};
/// Binomial CDF by direct pmf summation in log space.
pub fn binom_cdf(k: i64, n: u64, p: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut log_choose = 0.0f64;
    for j in 0..=n {
        if j > 0 {
            log_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        if j as i64 > k {
            break;
        }
        total += (log_choose + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp();
    }
    total
}

pub fn bisect(f: impl Fn(f64) -> f64, target: f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact interval from its definition: P(X >= k | lower) = a/2 and
/// P(X <= k | upper) = a/2.
pub fn cp_oracle(k: u64, n: u64, level: f64) -> (f64, f64) {
    let a = (1.0 - level) / 2.0;
    let lower = if k == 0 { 0.0 } else { bisect(|p| 1.0 - binom_cdf(k as i64 - 1, n, p), a, true) };
    let upper = if k == n { 1.0 } else { bisect(|p| binom_cdf(k as i64, n, p), a, false) };
    (lower, upper)
}

pub fn loglik(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let eta = x * b;
    (0..y.len())
        .map(|i| {
            let e = eta[i];
            y[i] * e - if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() }
        })
        .sum()
}

/// Newton's method on the log-likelihood with gradient and Hessian taken
/// by central finite differences: no shared code with the IRLS fitter.
pub fn direct_ml(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let k = x.ncols();
    let f = |b: &DVector<f64>| loglik(x, y, b);
    let mut b = DVector::zeros(k);
    let h = 1e-4;
    for _ in 0..100 {
        let mut g = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for i in 0..k {
            let mut e_i = DVector::zeros(k);
            e_i[i] = h;
            g[i] = (f(&(&b + &e_i)) - f(&(&b - &e_i))) / (2.0 * h);
            for j in 0..k {
                let mut e_j = DVector::zeros(k);
                e_j[j] = h;
                hess[(i, j)] = (f(&(&b + &e_i + &e_j)) - f(&(&b + &e_i - &e_j)) - f(&(&b - &e_i + &e_j))
                    + f(&(&b - &e_i - &e_j)))
                    / (4.0 * h * h);
            }
        }
        let step = hess.lu().solve(&(-&g)).unwrap();
        b += &step;
        if step.amax() < 1e-12 {
            break;
        }
    }
    b
}
