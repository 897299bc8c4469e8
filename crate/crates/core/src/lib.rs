//! Counterfactual letter-string analogy toolkit.
//!
//! Problems are built over permuted alphabets ([`alphabet`]), generated for
//! six transformation types ([`generate`]), solved and explained by a small
//! rule engine ([`oracle`]), scored from free-form answers ([`classify`]),
//! put to chat-completion models ([`harness`]) and summarized ([`stats`]).

pub mod alphabet;
pub mod classify;
pub mod error;
pub mod generate;
pub mod harness;
pub mod jsonl;
pub mod oracle;
pub mod problem;
pub mod stats;

pub use alphabet::PermutedAlphabet;
pub use error::{AlphabetError, GenError, JsonlError, OracleError};
pub use oracle::Rule;
pub use problem::{AnalogyProblem, GenerationMeta, IntervalSize, LetterString, SideParams, TransformationType};
