//! Symbolic rule engine.
//!
//! A [`Rule`] maps one letter string to another. The intended rules
//! implement the six transformation types; the remaining rule kinds are
//! less abstract alternatives (positional edits, fixed appends, rules read
//! against the ordinary a-z order) that can also reproduce a source pair.
//! [`induce_rules`] returns every catalog rule consistent with a pair.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alphabet::PermutedAlphabet;
use crate::error::OracleError;
use crate::problem::{AnalogyProblem, LetterString, TransformationType};

/// Shift sizes covered by the positional replace rule.
pub const REPLACE_DELTAS: [i64; 4] = [-2, -1, 1, 2];
/// Shift sizes covered by intended transforms and fixed appends.
pub const INTERVAL_DELTAS: [i64; 2] = [1, 2];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    IntendedTransform {
        transformation: TransformationType,
        delta: i64,
    },
    /// Exchange the letters at two positions (0-based).
    PositionalSwap { i: usize, j: usize },
    /// Shift the letter at one position by `delta` places.
    PositionalReplaceShift { position: usize, delta: i64 },
    PositionalDelete { position: usize },
    /// Append the letter `delta` places after the last one.
    AppendShift { delta: i64 },
    /// The inner rule evaluated against the standard a-z ordering.
    StandardAlphabetVariant { inner: Box<Rule> },
    /// Always produce the stored string.
    LiteralCopy { output: LetterString },
}

impl Rule {
    pub fn intended(transformation: TransformationType, delta: i64) -> Rule {
        Rule::IntendedTransform {
            transformation,
            delta,
        }
    }

    pub fn standard(inner: Rule) -> Rule {
        Rule::StandardAlphabetVariant {
            inner: Box::new(inner),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Rule::IntendedTransform { .. } => "intended_transform",
            Rule::PositionalSwap { .. } => "positional_swap",
            Rule::PositionalReplaceShift { .. } => "positional_replace_shift",
            Rule::PositionalDelete { .. } => "positional_delete",
            Rule::AppendShift { .. } => "append_shift",
            Rule::StandardAlphabetVariant { .. } => "standard_alphabet_variant",
            Rule::LiteralCopy { .. } => "literal_copy",
        }
    }

    pub fn is_literal_copy(&self) -> bool {
        matches!(self, Rule::LiteralCopy { .. })
    }

    /// Whether the rule reads letter order from the alphabet at all.
    pub fn is_order_dependent(&self) -> bool {
        matches!(
            self,
            Rule::IntendedTransform { .. }
                | Rule::PositionalReplaceShift { .. }
                | Rule::AppendShift { .. }
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::IntendedTransform {
                transformation,
                delta,
            } => write!(f, "{transformation}({delta})"),
            Rule::PositionalSwap { i, j } => write!(f, "swap({i},{j})"),
            Rule::PositionalReplaceShift { position, delta } => {
                write!(f, "replace_shift({position},{delta:+})")
            }
            Rule::PositionalDelete { position } => write!(f, "delete({position})"),
            Rule::AppendShift { delta } => write!(f, "append_shift({delta:+})"),
            Rule::StandardAlphabetVariant { inner } => write!(f, "std[{inner}]"),
            Rule::LiteralCopy { output } => write!(f, "copy{output}"),
        }
    }
}

/// Applies `rule` to `input`. `None` means the rule is inapplicable: a
/// position past the end, a shift leaving the alphabet, or an input that
/// lacks the structure the rule needs.
pub fn apply_rule(rule: &Rule, alphabet: &PermutedAlphabet, input: &LetterString) -> Option<LetterString> {
    if !input.letters().iter().all(|c| c.is_ascii_lowercase()) {
        return None;
    }
    let s = input.letters();
    match rule {
        Rule::IntendedTransform {
            transformation,
            delta,
        } => apply_intended(*transformation, *delta, alphabet, s),
        Rule::PositionalSwap { i, j } => {
            if *i >= s.len() || *j >= s.len() || i == j {
                return None;
            }
            let mut out = s.to_vec();
            out.swap(*i, *j);
            Some(LetterString(out))
        }
        Rule::PositionalReplaceShift { position, delta } => {
            let c = *s.get(*position)?;
            let mut out = s.to_vec();
            out[*position] = alphabet.shift(c, *delta).ok()?;
            Some(LetterString(out))
        }
        Rule::PositionalDelete { position } => {
            if *position >= s.len() {
                return None;
            }
            let mut out = s.to_vec();
            out.remove(*position);
            Some(LetterString(out))
        }
        Rule::AppendShift { delta } => {
            let last = *s.last()?;
            let mut out = s.to_vec();
            out.push(alphabet.shift(last, *delta).ok()?);
            Some(LetterString(out))
        }
        Rule::StandardAlphabetVariant { inner } => {
            apply_rule(inner, &PermutedAlphabet::standard(), input)
        }
        Rule::LiteralCopy { output } => Some(output.clone()),
    }
}

fn apply_intended(
    t: TransformationType,
    delta: i64,
    alphabet: &PermutedAlphabet,
    s: &[char],
) -> Option<LetterString> {
    if delta < 1 {
        return None;
    }
    let mut out = s.to_vec();
    match t {
        TransformationType::ExtendSequence => {
            let last = *s.last()?;
            out.push(alphabet.shift(last, delta).ok()?);
        }
        TransformationType::Successor => {
            let last = out.last_mut()?;
            *last = alphabet.shift(*last, delta).ok()?;
        }
        TransformationType::Predecessor => {
            let first = out.first_mut()?;
            *first = alphabet.shift(*first, -delta).ok()?;
        }
        TransformationType::RemoveRedundant => {
            let mut dups = (1..s.len()).filter(|&k| s[k] == s[k - 1]);
            let k = dups.next()?;
            if dups.next().is_some() {
                return None;
            }
            out.remove(k);
            if !is_progression(alphabet, &out, delta) {
                return None;
            }
        }
        TransformationType::FixSequence => {
            let (position, letter) = find_misfit(alphabet, s, delta)?;
            out[position] = letter;
        }
        TransformationType::Sort => {
            let mut keyed: Vec<(usize, char)> = s
                .iter()
                .map(|&c| alphabet.index_of(c).map(|i| (i, c)))
                .collect::<Result<_, _>>()
                .ok()?;
            keyed.sort_unstable();
            out = keyed.into_iter().map(|(_, c)| c).collect();
            if !is_progression(alphabet, &out, delta) {
                return None;
            }
        }
    }
    Some(LetterString(out))
}

/// True when consecutive letters are exactly `step` apart in `alphabet`.
pub fn is_progression(alphabet: &PermutedAlphabet, letters: &[char], step: i64) -> bool {
    let Ok(idx) = letters
        .iter()
        .map(|&c| alphabet.index_of(c))
        .collect::<Result<Vec<_>, _>>()
    else {
        return false;
    };
    idx.windows(2).all(|w| w[1] as i64 - w[0] as i64 == step)
}

/// Finds the single position at which `s` departs from an arithmetic run
/// with the given step, and the letter that belongs there.
fn find_misfit(alphabet: &PermutedAlphabet, s: &[char], step: i64) -> Option<(usize, char)> {
    if s.len() < 3 {
        return None;
    }
    let idx: Vec<i64> = s
        .iter()
        .map(|&c| alphabet.index_of(c).map(|i| i as i64))
        .collect::<Result<_, _>>()
        .ok()?;
    // Every position except the misfit lies on the run, so one of the
    // first two positions anchors it.
    for anchor in 0..2 {
        let start = idx[anchor] - anchor as i64 * step;
        let misses: Vec<usize> = (0..idx.len())
            .filter(|&k| idx[k] != start + k as i64 * step)
            .collect();
        if let [k] = misses[..] {
            let letter = alphabet.letter_at(start + k as i64 * step).ok()?;
            return Some((k, letter));
        }
    }
    None
}

/// Every non-literal catalog rule for strings of length `len`, in a fixed
/// order.
pub fn catalog(len: usize) -> Vec<Rule> {
    let mut base = Vec::new();
    for t in TransformationType::ALL {
        for d in INTERVAL_DELTAS {
            base.push(Rule::intended(t, d));
        }
    }
    for p in 0..len {
        for d in REPLACE_DELTAS {
            base.push(Rule::PositionalReplaceShift { position: p, delta: d });
        }
    }
    for d in INTERVAL_DELTAS {
        base.push(Rule::AppendShift { delta: d });
    }
    let mut rules: Vec<Rule> = base
        .iter()
        .filter(|r| r.is_order_dependent())
        .map(|r| Rule::standard(r.clone()))
        .collect();
    rules.splice(0..0, base);
    for i in 0..len {
        for j in i + 1..len {
            rules.push(Rule::PositionalSwap { i, j });
        }
    }
    for p in 0..len {
        rules.push(Rule::PositionalDelete { position: p });
    }
    rules
}

/// All catalog rules that map `source_a` to `source_b`, plus the literal
/// copy of `source_b`, which reproduces any pair.
///
/// Positional and append rules are derived from the difference between the
/// two strings rather than by enumerating the catalog.
pub fn induce_rules(
    alphabet: &PermutedAlphabet,
    source_a: &LetterString,
    source_b: &LetterString,
) -> BTreeSet<Rule> {
    let mut found = BTreeSet::new();
    let a = source_a.letters();
    let b = source_b.letters();
    let std = PermutedAlphabet::standard();

    for t in TransformationType::ALL {
        for d in INTERVAL_DELTAS {
            let rule = Rule::intended(t, d);
            if apply_rule(&rule, alphabet, source_a).as_ref() == Some(source_b) {
                found.insert(rule.clone());
            }
            if apply_rule(&rule, &std, source_a).as_ref() == Some(source_b) {
                found.insert(Rule::standard(rule));
            }
        }
    }

    if a.len() == b.len() {
        let diff: Vec<usize> = (0..a.len()).filter(|&k| a[k] != b[k]).collect();
        match diff[..] {
            [p] => {
                for (alpha, wrap) in [(alphabet, false), (&std, true)] {
                    if let (Ok(x), Ok(y)) = (alpha.index_of(a[p]), alpha.index_of(b[p])) {
                        let delta = y as i64 - x as i64;
                        if REPLACE_DELTAS.contains(&delta) {
                            let rule = Rule::PositionalReplaceShift { position: p, delta };
                            found.insert(if wrap { Rule::standard(rule) } else { rule });
                        }
                    }
                }
            }
            [i, j] if a[i] == b[j] && a[j] == b[i] => {
                found.insert(Rule::PositionalSwap { i, j });
            }
            [] => {
                // swapping two equal letters is a no-op
                for i in 0..a.len() {
                    for j in i + 1..a.len() {
                        if a[i] == a[j] {
                            found.insert(Rule::PositionalSwap { i, j });
                        }
                    }
                }
            }
            _ => {}
        }
    } else if b.len() == a.len() + 1 && b[..a.len()] == *a && !a.is_empty() {
        let (last, added) = (a[a.len() - 1], b[a.len()]);
        for (alpha, wrap) in [(alphabet, false), (&std, true)] {
            if let (Ok(x), Ok(y)) = (alpha.index_of(last), alpha.index_of(added)) {
                let delta = y as i64 - x as i64;
                if INTERVAL_DELTAS.contains(&delta) {
                    let rule = Rule::AppendShift { delta };
                    found.insert(if wrap { Rule::standard(rule) } else { rule });
                }
            }
        }
    } else if a.len() == b.len() + 1 {
        for p in 0..a.len() {
            if a[..p] == b[..p] && a[p + 1..] == b[p..] {
                found.insert(Rule::PositionalDelete { position: p });
            }
        }
    }

    found.insert(Rule::LiteralCopy {
        output: source_b.clone(),
    });
    found
}

/// The intended answer: the problem's transformation at its interval,
/// applied to the target string.
pub fn solve(problem: &AnalogyProblem, alphabet: &PermutedAlphabet) -> Result<LetterString, OracleError> {
    if problem.alphabet_id != alphabet.id() {
        return Err(OracleError::AlphabetMismatch {
            problem: problem.id.clone(),
            expected: problem.alphabet_id.clone(),
            given: alphabet.id().to_string(),
        });
    }
    let rule = intended_rule(problem);
    apply_rule(&rule, alphabet, &problem.target_a)
        .ok_or_else(|| OracleError::Inapplicable(problem.id.clone()))
}

pub fn intended_rule(problem: &AnalogyProblem) -> Rule {
    Rule::intended(problem.transformation, problem.interval.step())
}
