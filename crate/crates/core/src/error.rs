use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlphabetError {
    #[error("unknown letter {0:?}: expected lowercase a-z")]
    UnknownLetter(char),
    #[error("position {0} is outside the alphabet (0..=25)")]
    OutOfRange(i64),
    #[error("alphabet must have 26 letters, got {0}")]
    WrongLength(usize),
    #[error("letter {0:?} appears more than once")]
    DuplicateLetter(char),
    #[error("alphabet token {0:?} is not a single letter")]
    BadToken(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("generated problem {id} failed self-check: {reason}")]
    Inconsistent { id: String, reason: String },
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("intended rule is inapplicable to the target of problem {0}")]
    Inapplicable(String),
    #[error("problem {problem} uses alphabet {expected} but {given} was supplied")]
    AlphabetMismatch {
        problem: String,
        expected: String,
        given: String,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("perfect or quasi-perfect separation detected after {iterations} iterations")]
    SeparationDetected { iterations: usize },
    #[error("design matrix is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },
    #[error("no trials for design cell: {0}")]
    EmptyCell(String),
    #[error("records reference unknown problems: {}", .0.join(", "))]
    MissingJoin(Vec<String>),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("configuration error: {0}")]
    Config(String),
}
