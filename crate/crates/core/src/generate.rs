//! Problem generation for all six transformation types at interval 1 and 2.
//!
//! Shift types (extend, successor, predecessor) start from four consecutive
//! letters and shift by the interval. The other three start from five
//! letters spaced at the interval and then break the run (duplicate a
//! letter, replace one, or swap two); the transformed string is the run.

use std::ops::RangeInclusive;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{PermutedAlphabet, ALPHABET_LEN};
use crate::error::GenError;
use crate::oracle::{apply_rule, intended_rule, solve};
use crate::problem::{
    AnalogyProblem, GenerationMeta, IntervalSize, LetterString, SideParams, TransformationType,
};

const SHIFT_LEN: usize = 4;
const RUN_LEN: usize = 5;

/// Letters at `start`, `start + step`, ... in `alphabet`.
pub fn build_base_sequence(
    alphabet: &PermutedAlphabet,
    start: usize,
    length: usize,
    step: i64,
) -> Result<LetterString, GenError> {
    if step < 1 {
        return Err(GenError::InvalidParams(format!("step must be >= 1, got {step}")));
    }
    (0..length)
        .map(|k| alphabet.letter_at(start as i64 + k as i64 * step))
        .collect::<Result<Vec<_>, _>>()
        .map(LetterString)
        .map_err(GenError::from)
}

/// Valid start indices for one side of a problem.
pub fn start_range(t: TransformationType, interval: IntervalSize) -> RangeInclusive<usize> {
    let i = interval.get() as usize;
    let last = ALPHABET_LEN - 1;
    match t {
        TransformationType::ExtendSequence | TransformationType::Successor => {
            0..=last - (SHIFT_LEN - 1) - i
        }
        TransformationType::Predecessor => i..=last - (SHIFT_LEN - 1),
        _ => 0..=last - (RUN_LEN - 1) * i,
    }
}

/// Builds the untransformed and transformed strings for one side.
pub fn build_pair(
    alphabet: &PermutedAlphabet,
    t: TransformationType,
    interval: IntervalSize,
    side: &SideParams,
) -> Result<(LetterString, LetterString), GenError> {
    let d = interval.step();
    if t.is_shift_type() {
        let a = build_base_sequence(alphabet, side.start, SHIFT_LEN, 1)?;
        let mut b = a.0.clone();
        match t {
            TransformationType::ExtendSequence => b.push(alphabet.shift(b[SHIFT_LEN - 1], d)?),
            TransformationType::Successor => {
                b[SHIFT_LEN - 1] = alphabet.shift(b[SHIFT_LEN - 1], d)?
            }
            _ => b[0] = alphabet.shift(b[0], -d)?,
        }
        return Ok((a, LetterString(b)));
    }

    let base = build_base_sequence(alphabet, side.start, RUN_LEN, d)?;
    let mut a = base.0.clone();
    match t {
        TransformationType::RemoveRedundant => {
            let p = position(side, "modified_position")?;
            a.insert(p + 1, a[p]);
        }
        TransformationType::FixSequence => {
            let p = position(side, "modified_position")?;
            let letter = side
                .distractor_letter
                .ok_or_else(|| GenError::InvalidParams("distractor_letter is required".into()))?;
            alphabet.index_of(letter)?;
            if letter == a[p] {
                return Err(GenError::InvalidParams(format!(
                    "distractor {letter:?} equals the correct letter"
                )));
            }
            if a.contains(&letter) {
                return Err(GenError::InvalidParams(format!(
                    "distractor {letter:?} already occurs in the sequence"
                )));
            }
            a[p] = letter;
        }
        TransformationType::Sort => {
            let (i, j) = side
                .swap_pair
                .ok_or_else(|| GenError::InvalidParams("swap_pair is required".into()))?;
            if i == j || i >= RUN_LEN || j >= RUN_LEN {
                return Err(GenError::InvalidParams(format!("bad swap pair ({i}, {j})")));
            }
            a.swap(i, j);
        }
        _ => unreachable!("shift types handled above"),
    }
    Ok((LetterString(a), base))
}

fn position(side: &SideParams, name: &str) -> Result<usize, GenError> {
    match side.modified_position {
        Some(p) if p < RUN_LEN => Ok(p),
        Some(p) => Err(GenError::InvalidParams(format!("{name} {p} is out of range"))),
        None => Err(GenError::InvalidParams(format!("{name} is required"))),
    }
}

pub fn build_source_pair(
    alphabet: &PermutedAlphabet,
    t: TransformationType,
    interval: IntervalSize,
    meta: &GenerationMeta,
) -> Result<(LetterString, LetterString), GenError> {
    build_pair(alphabet, t, interval, &meta.source)
}

/// Assembles a problem from explicit parameters and checks that the
/// intended rule reproduces both the source pair and the answer.
pub fn problem_from_params(
    alphabet: &PermutedAlphabet,
    t: TransformationType,
    interval: IntervalSize,
    source: SideParams,
    target: SideParams,
    id: String,
    seed: u64,
) -> Result<AnalogyProblem, GenError> {
    if source.start == target.start {
        return Err(GenError::InvalidParams(
            "source and target must start at different letters".into(),
        ));
    }
    let meta = GenerationMeta::new(t, interval, source, target);
    let (source_a, source_b) = build_pair(alphabet, t, interval, &meta.source)?;
    let (target_a, expected) = build_pair(alphabet, t, interval, &meta.target)?;
    let mut problem = AnalogyProblem {
        id,
        alphabet_id: alphabet.id().to_string(),
        transformation: t,
        interval,
        source_a,
        source_b,
        target_a,
        answer: None,
        meta: Some(meta),
        seed,
    };

    let inconsistent = |problem: &AnalogyProblem, reason: String| GenError::Inconsistent {
        id: problem.id.clone(),
        reason,
    };
    let rule = intended_rule(&problem);
    if apply_rule(&rule, alphabet, &problem.source_a).as_ref() != Some(&problem.source_b) {
        return Err(inconsistent(&problem, format!("{rule} does not map source A to B")));
    }
    let answer = solve(&problem, alphabet).map_err(|e| inconsistent(&problem, e.to_string()))?;
    if answer != expected {
        return Err(inconsistent(
            &problem,
            format!("oracle answer {answer} differs from constructed {expected}"),
        ));
    }
    problem.answer = Some(answer);
    Ok(problem)
}

/// Letters that can stand in for position `p` of `base`: not already in the
/// run, and out of order with their neighbours.
pub fn distractor_candidates(
    alphabet: &PermutedAlphabet,
    base: &LetterString,
    p: usize,
) -> Vec<char> {
    let idx = base.indices(alphabet).expect("base letters come from the alphabet");
    let lo = if p == 0 { None } else { Some(idx[p - 1]) };
    let hi = idx.get(p + 1).copied();
    alphabet
        .letters()
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            let in_order = lo.is_none_or(|l| *i > l) && hi.is_none_or(|h| *i < h);
            !base.letters().contains(c) && !in_order
        })
        .map(|(_, &c)| c)
        .collect()
}

const SWAP_PAIRS: [(usize, usize); 10] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (0, 4),
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 3),
    (2, 4),
    (3, 4),
];

fn sample_side<R: Rng + ?Sized>(
    alphabet: &PermutedAlphabet,
    t: TransformationType,
    interval: IntervalSize,
    start: usize,
    avoid: Option<&SideParams>,
    rng: &mut R,
) -> Result<SideParams, GenError> {
    let side = SideParams::at(start);
    let avoid_pos = avoid.and_then(|s| s.modified_position);
    Ok(match t {
        TransformationType::RemoveRedundant => {
            let choices: Vec<usize> = (0..RUN_LEN).filter(|p| Some(*p) != avoid_pos).collect();
            side.with_position(*choices.choose(rng).expect("nonempty"))
        }
        TransformationType::Sort => {
            let avoid_pair = avoid.and_then(|s| s.swap_pair);
            let choices: Vec<(usize, usize)> =
                SWAP_PAIRS.into_iter().filter(|p| Some(*p) != avoid_pair).collect();
            let (i, j) = *choices.choose(rng).expect("nonempty");
            side.with_swap(i, j)
        }
        TransformationType::FixSequence => {
            let base = build_base_sequence(alphabet, start, RUN_LEN, interval.step())?;
            let options: Vec<(usize, Vec<char>)> = (0..RUN_LEN)
                .filter(|p| Some(*p) != avoid_pos)
                .map(|p| (p, distractor_candidates(alphabet, &base, p)))
                .filter(|(_, c)| !c.is_empty())
                .collect();
            let (p, letters) = options
                .choose(rng)
                .ok_or_else(|| GenError::InvalidParams(format!("no distractor fits start {start}")))?;
            side.with_distractor(*p, *letters.choose(rng).expect("nonempty"))
        }
        _ => side,
    })
}

/// Draws one problem. Starts are uniform over the valid range with the
/// target start distinct from the source start; positional choices for the
/// target are drawn independently but never repeat the source's.
pub fn generate_problem<R: Rng + ?Sized>(
    alphabet: &PermutedAlphabet,
    t: TransformationType,
    interval: IntervalSize,
    rng: &mut R,
    id: String,
    seed: u64,
) -> Result<AnalogyProblem, GenError> {
    let range = start_range(t, interval);
    let (lo, width) = (*range.start(), range.end() - range.start() + 1);
    let source_off = rng.random_range(0..width);
    let mut target_off = rng.random_range(0..width - 1);
    if target_off >= source_off {
        target_off += 1;
    }
    let source = sample_side(alphabet, t, interval, lo + source_off, None, rng)?;
    let target = sample_side(alphabet, t, interval, lo + target_off, Some(&source), rng)?;
    problem_from_params(alphabet, t, interval, source, target, id, seed)
}

/// Generates a problem from its own seed, so any problem can be rebuilt
/// from the `seed` field alone.
pub fn generate_seeded(
    alphabet: &PermutedAlphabet,
    t: TransformationType,
    interval: IntervalSize,
    seed: u64,
    id: String,
) -> Result<AnalogyProblem, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_problem(alphabet, t, interval, &mut rng, id, seed)
}

pub fn problem_id(alphabet_id: &str, t: TransformationType, interval: IntervalSize, n: usize) -> String {
    format!("{alphabet_id}-{t}-{interval}-{n:04}")
}

/// SplitMix64 finalizer, used to derive independent per-problem seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn problem_seed(set_seed: u64, t: TransformationType, interval: IntervalSize, n: usize) -> u64 {
    let cell = (interval.get() as u64) << 8 | t as u64;
    mix64(mix64(set_seed ^ mix64(cell)).wrapping_add(n as u64))
}

/// `per_cell` problems for every (interval, transformation) cell, ordered
/// by interval, then transformation, then counter.
pub fn generate_problem_set(
    alphabet: &PermutedAlphabet,
    per_cell: usize,
    intervals: &[IntervalSize],
    seed: u64,
) -> Result<Vec<AnalogyProblem>, GenError> {
    if per_cell == 0 {
        return Err(GenError::InvalidParams("per-cell count must be at least 1".into()));
    }
    let mut intervals = intervals.to_vec();
    intervals.sort();
    intervals.dedup();
    let mut out = Vec::with_capacity(per_cell * intervals.len() * TransformationType::ALL.len());
    for &interval in &intervals {
        for t in TransformationType::ALL {
            for n in 0..per_cell {
                let id = problem_id(alphabet.id(), t, interval, n);
                out.push(generate_seeded(alphabet, t, interval, problem_seed(seed, t, interval, n), id)?);
            }
        }
    }
    Ok(out)
}
