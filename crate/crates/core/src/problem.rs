//! Problem data model and its JSONL representation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alphabet::PermutedAlphabet;
use crate::error::{AlphabetError, JsonlError};
use crate::jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformationType {
    ExtendSequence,
    Successor,
    Predecessor,
    RemoveRedundant,
    FixSequence,
    Sort,
}

impl TransformationType {
    pub const ALL: [TransformationType; 6] = [
        TransformationType::ExtendSequence,
        TransformationType::Successor,
        TransformationType::Predecessor,
        TransformationType::RemoveRedundant,
        TransformationType::FixSequence,
        TransformationType::Sort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransformationType::ExtendSequence => "extend_sequence",
            TransformationType::Successor => "successor",
            TransformationType::Predecessor => "predecessor",
            TransformationType::RemoveRedundant => "remove_redundant",
            TransformationType::FixSequence => "fix_sequence",
            TransformationType::Sort => "sort",
        }
    }

    /// Row label used in the valid-error tables.
    pub fn display_name(self) -> &'static str {
        match self {
            TransformationType::ExtendSequence => "Extend sequence",
            TransformationType::Successor => "Successor",
            TransformationType::Predecessor => "Predecessor",
            TransformationType::RemoveRedundant => "Remove redundant letter",
            TransformationType::FixSequence => "Fix alphabetic sequence",
            TransformationType::Sort => "Sort",
        }
    }

    /// Types built from a consecutive four-letter run rather than a
    /// five-letter run spaced at the interval.
    pub fn is_shift_type(self) -> bool {
        matches!(
            self,
            TransformationType::ExtendSequence
                | TransformationType::Successor
                | TransformationType::Predecessor
        )
    }
}

impl fmt::Display for TransformationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TransformationType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown transformation type {s:?}"))
    }
}

/// Interval size: 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct IntervalSize(u8);

impl IntervalSize {
    pub const ONE: IntervalSize = IntervalSize(1);
    pub const TWO: IntervalSize = IntervalSize(2);

    pub fn new(value: u8) -> Result<Self, String> {
        match value {
            1 | 2 => Ok(IntervalSize(value)),
            other => Err(format!("interval size must be 1 or 2, got {other}")),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn step(self) -> i64 {
        self.0 as i64
    }
}

impl TryFrom<u8> for IntervalSize {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        IntervalSize::new(value)
    }
}

impl From<IntervalSize> for u8 {
    fn from(v: IntervalSize) -> u8 {
        v.0
    }
}

impl fmt::Display for IntervalSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for IntervalSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: u8 = s.trim().parse().map_err(|_| format!("bad interval {s:?}"))?;
        IntervalSize::new(v)
    }
}

/// An ordered run of letters, rendered as `[x y l k]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LetterString(pub Vec<char>);

impl LetterString {
    pub fn new(letters: Vec<char>) -> Self {
        LetterString(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[char] {
        &self.0
    }

    /// Indices of each letter in `alphabet`.
    pub fn indices(&self, alphabet: &PermutedAlphabet) -> Result<Vec<usize>, AlphabetError> {
        self.0.iter().map(|&c| alphabet.index_of(c)).collect()
    }

    /// Space-separated letters without brackets.
    pub fn spaced(&self) -> String {
        let mut s = String::with_capacity(self.0.len() * 2);
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push(*c);
        }
        s
    }
}

impl fmt::Display for LetterString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.spaced())
    }
}

impl fmt::Debug for LetterString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for LetterString {
    type Err = String;

    /// Parses `[x y l k]`, `x y l k` or `xylk`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let letters: Vec<char> = inner.chars().filter(|c| !c.is_whitespace()).collect();
        if letters.iter().all(|c| c.is_ascii_lowercase()) {
            Ok(LetterString(letters))
        } else {
            Err(format!("not a lowercase letter string: {s:?}"))
        }
    }
}

impl From<&str> for LetterString {
    /// Convenience for literals; panics on non-letters.
    fn from(s: &str) -> Self {
        s.parse().expect("letter string literal")
    }
}

/// Random choices for one side (source or target) of a problem.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SideParams {
    pub start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified_position: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distractor_letter: Option<char>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap_pair: Option<(usize, usize)>,
}

impl SideParams {
    pub fn at(start: usize) -> Self {
        SideParams {
            start,
            ..Default::default()
        }
    }

    pub fn with_position(mut self, position: usize) -> Self {
        self.modified_position = Some(position);
        self
    }

    pub fn with_distractor(mut self, position: usize, letter: char) -> Self {
        self.modified_position = Some(position);
        self.distractor_letter = Some(letter);
        self
    }

    pub fn with_swap(mut self, i: usize, j: usize) -> Self {
        self.swap_pair = Some((i.min(j), i.max(j)));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationMeta {
    /// Letter spacing of the ordered base sequence.
    pub base_step: i64,
    /// Shift applied by successor, predecessor and extension problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform_delta: Option<i64>,
    pub source: SideParams,
    pub target: SideParams,
}

impl GenerationMeta {
    pub fn new(
        transformation: TransformationType,
        interval: IntervalSize,
        source: SideParams,
        target: SideParams,
    ) -> Self {
        let (base_step, transform_delta) = if transformation.is_shift_type() {
            (1, Some(interval.step()))
        } else {
            (interval.step(), None)
        };
        GenerationMeta {
            base_step,
            transform_delta,
            source,
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyProblem {
    pub id: String,
    pub alphabet_id: String,
    pub transformation: TransformationType,
    pub interval: IntervalSize,
    pub source_a: LetterString,
    pub source_b: LetterString,
    pub target_a: LetterString,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<LetterString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<GenerationMeta>,
    pub seed: u64,
}

impl AnalogyProblem {
    /// Copy with the answer key and generation metadata removed.
    pub fn to_public(&self) -> AnalogyProblem {
        AnalogyProblem {
            answer: None,
            meta: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportMode {
    #[default]
    Full,
    Public,
}

impl FromStr for ExportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(ExportMode::Full),
            "public" => Ok(ExportMode::Public),
            other => Err(format!("unknown export mode {other:?} (full|public)")),
        }
    }
}

pub fn write_problems(
    path: &Path,
    problems: &[AnalogyProblem],
    mode: ExportMode,
) -> Result<(), JsonlError> {
    match mode {
        ExportMode::Full => jsonl::write_atomic(path, problems),
        ExportMode::Public => {
            let public: Vec<AnalogyProblem> = problems.iter().map(|p| p.to_public()).collect();
            jsonl::write_atomic(path, &public)
        }
    }
}

pub fn read_problems(path: &Path) -> Result<Vec<AnalogyProblem>, JsonlError> {
    jsonl::read(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letter_string_parse_and_display() {
        let s: LetterString = "[x y l k]".parse().unwrap();
        assert_eq!(s.to_string(), "[x y l k]");
        assert_eq!(LetterString::from("jrqh").to_string(), "[j r q h]");
        assert!("[x 3]".parse::<LetterString>().is_err());
    }

    #[test]
    fn interval_validation() {
        assert!(IntervalSize::new(0).is_err());
        assert!(IntervalSize::new(3).is_err());
        assert!(serde_json::from_str::<IntervalSize>("3").is_err());
        assert_eq!(serde_json::from_str::<IntervalSize>("2").unwrap(), IntervalSize::TWO);
    }

    #[test]
    fn transformation_names_round_trip() {
        for t in TransformationType::ALL {
            assert_eq!(t.as_str().parse::<TransformationType>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.as_str()));
        }
        assert!("rotate".parse::<TransformationType>().is_err());
    }
}
