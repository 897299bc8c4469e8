//! Permuted alphabets and in-alphabet index arithmetic.
//!
//! Every successor, predecessor and ordering relation in a problem is read
//! against a [`PermutedAlphabet`]. Shifts never wrap around: stepping past
//! either end of the alphabet is an error.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AlphabetError;

pub const ALPHABET_LEN: usize = 26;

/// Ordering used by the original counterfactual problem set.
pub const HW_LETTERS: &str = "x y l k w b f z t n j r q a h v g m u o p d i c s e";

/// Second synthetic ordering used to check for training-data contamination.
pub const ALT_LETTERS: &str = "n h v b o p y z t m r w x f i q d j l c a s k g e u";

pub const STANDARD_LETTERS: &str = "a b c d e f g h i j k l m n o p q r s t u v w x y z";

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAlphabet", into = "RawAlphabet")]
pub struct PermutedAlphabet {
    id: String,
    letters: [char; ALPHABET_LEN],
    // position of b'a' + k, filled on construction
    positions: [u8; ALPHABET_LEN],
}

#[derive(Serialize, Deserialize)]
struct RawAlphabet {
    id: String,
    letters: Vec<char>,
}

impl TryFrom<RawAlphabet> for PermutedAlphabet {
    type Error = AlphabetError;

    fn try_from(raw: RawAlphabet) -> Result<Self, Self::Error> {
        PermutedAlphabet::new(raw.id, &raw.letters)
    }
}

impl From<PermutedAlphabet> for RawAlphabet {
    fn from(a: PermutedAlphabet) -> Self {
        RawAlphabet {
            id: a.id,
            letters: a.letters.to_vec(),
        }
    }
}

impl PermutedAlphabet {
    /// Validates that `letters` is a permutation of `a..=z`.
    pub fn new(id: impl Into<String>, letters: &[char]) -> Result<Self, AlphabetError> {
        if letters.len() != ALPHABET_LEN {
            return Err(AlphabetError::WrongLength(letters.len()));
        }
        let mut out = ['a'; ALPHABET_LEN];
        let mut positions = [u8::MAX; ALPHABET_LEN];
        for (i, &c) in letters.iter().enumerate() {
            let slot = letter_slot(c)?;
            if positions[slot] != u8::MAX {
                return Err(AlphabetError::DuplicateLetter(c));
            }
            positions[slot] = i as u8;
            out[i] = c;
        }
        Ok(Self {
            id: id.into(),
            letters: out,
            positions,
        })
    }

    /// Parses a config line of 26 whitespace-separated letters, or the same
    /// letters written as one word.
    pub fn parse_line(id: impl Into<String>, line: &str) -> Result<Self, AlphabetError> {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.contains(char::is_whitespace) && trimmed.chars().count() > 1 {
            return Self::new(id, &trimmed.chars().collect::<Vec<_>>());
        }
        let mut letters = Vec::with_capacity(ALPHABET_LEN);
        for tok in line.split_whitespace() {
            let mut chars = tok.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => letters.push(c),
                _ => return Err(AlphabetError::BadToken(tok.to_string())),
            }
        }
        Self::new(id, &letters)
    }

    pub fn hw() -> Self {
        Self::parse_line("hw", HW_LETTERS).expect("built-in alphabet is a permutation")
    }

    pub fn alt() -> Self {
        Self::parse_line("alt", ALT_LETTERS).expect("built-in alphabet is a permutation")
    }

    pub fn standard() -> Self {
        Self::parse_line("std", STANDARD_LETTERS).expect("built-in alphabet is a permutation")
    }

    /// Looks up a built-in alphabet by id (`hw`, `alt`, `std`).
    pub fn builtin(id: &str) -> Option<Self> {
        match id {
            "hw" => Some(Self::hw()),
            "alt" => Some(Self::alt()),
            "std" | "standard" => Some(Self::standard()),
            _ => None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn letters(&self) -> &[char] {
        &self.letters
    }

    pub fn index_of(&self, letter: char) -> Result<usize, AlphabetError> {
        Ok(self.positions[letter_slot(letter)?] as usize)
    }

    pub fn letter_at(&self, position: i64) -> Result<char, AlphabetError> {
        if (0..ALPHABET_LEN as i64).contains(&position) {
            Ok(self.letters[position as usize])
        } else {
            Err(AlphabetError::OutOfRange(position))
        }
    }

    /// Moves `delta` places along the alphabet, without wraparound.
    pub fn shift(&self, letter: char, delta: i64) -> Result<char, AlphabetError> {
        let idx = self.index_of(letter)? as i64;
        self.letter_at(idx + delta)
    }

    /// Space-separated rendering, the form used in prompts and config files.
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(ALPHABET_LEN * 2);
        for (i, c) in self.letters.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push(*c);
        }
        s
    }
}

impl fmt::Debug for PermutedAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PermutedAlphabet({}: [{}])", self.id, self.to_line())
    }
}

impl FromStr for PermutedAlphabet {
    type Err = AlphabetError;

    /// Accepts a built-in id or a line of 26 letters (id `custom`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Self::builtin(s.trim()) {
            Some(a) => Ok(a),
            None => Self::parse_line("custom", s),
        }
    }
}

/// Alphabets available to a run, keyed by id. Starts with the built-ins.
#[derive(Debug, Clone)]
pub struct Alphabets {
    by_id: std::collections::BTreeMap<String, PermutedAlphabet>,
}

impl Default for Alphabets {
    fn default() -> Self {
        let mut a = Alphabets {
            by_id: Default::default(),
        };
        for alpha in [PermutedAlphabet::hw(), PermutedAlphabet::alt(), PermutedAlphabet::standard()] {
            a.insert(alpha);
        }
        a
    }
}

impl Alphabets {
    pub fn insert(&mut self, alphabet: PermutedAlphabet) {
        self.by_id.insert(alphabet.id().to_string(), alphabet);
    }

    pub fn get(&self, id: &str) -> Option<&PermutedAlphabet> {
        self.by_id.get(id)
    }
}

fn letter_slot(c: char) -> Result<usize, AlphabetError> {
    if c.is_ascii_lowercase() {
        Ok((c as u8 - b'a') as usize)
    } else {
        Err(AlphabetError::UnknownLetter(c))
    }
}
