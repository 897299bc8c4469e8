use std::str::FromStr;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChatModel, ChatRequest};
use crate::alphabet::{Alphabets, PermutedAlphabet};
use crate::error::HarnessError;
use crate::generate::mix64;
use crate::oracle::{apply_rule, induce_rules, intended_rule, solve};
use crate::problem::{AnalogyProblem, LetterString};

pub const REFUSAL_TEXT: &str =
    "I'm sorry, but there is too much uncertainty about the pattern to give a definite answer.";

#[derive(Debug, Clone, PartialEq)]
pub enum MockPolicy {
    /// Always the intended answer.
    Oracle,
    /// Intended answer with probability p, otherwise a random wrong string.
    Noisy(f64),
    /// Applies the first alternative rule of this kind (see
    /// [`crate::Rule::kind_name`]) that reproduces the source pair and
    /// changes the answer; falls back to the intended answer.
    AlternativeRule(String),
    /// Refuses this many times, then answers correctly.
    RefuseN(u32),
}

impl FromStr for MockPolicy {
    type Err = String;

    /// `ORACLE`, `NOISY:0.6`, `ALT:positional_swap`, `REFUSE:2`
    /// (case-insensitive prefix).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head.to_ascii_uppercase().as_str(), arg) {
            ("ORACLE", None) => Ok(MockPolicy::Oracle),
            ("NOISY", Some(p)) => {
                let p: f64 = p.parse().map_err(|_| format!("bad probability {p:?}"))?;
                if (0.0..=1.0).contains(&p) {
                    Ok(MockPolicy::Noisy(p))
                } else {
                    Err(format!("probability {p} outside [0, 1]"))
                }
            }
            ("ALT", Some(kind)) => Ok(MockPolicy::AlternativeRule(kind.to_ascii_lowercase())),
            ("REFUSE", Some(n)) => n
                .parse()
                .map(MockPolicy::RefuseN)
                .map_err(|_| format!("bad refusal count {n:?}")),
            _ => Err(format!(
                "unknown mock policy {s:?} (ORACLE, NOISY:p, ALT:kind, REFUSE:n)"
            )),
        }
    }
}

/// Offline stand-in for a model endpoint. Replies depend only on the
/// policy, the seed, the problem id and the attempt number, so runs are
/// reproducible regardless of request order.
#[derive(Debug, Clone)]
pub struct MockModel {
    policy: MockPolicy,
    seed: u64,
    alphabets: Alphabets,
}

impl MockModel {
    pub fn new(policy: MockPolicy, seed: u64, alphabets: Alphabets) -> Self {
        MockModel {
            policy,
            seed,
            alphabets,
        }
    }

    fn rng_for(&self, problem_id: &str, attempt: u32) -> ChaCha8Rng {
        // FNV-1a over the id, then mixed with seed and attempt
        let h = problem_id
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        ChaCha8Rng::seed_from_u64(mix64(self.seed ^ mix64(h ^ mix64(attempt as u64))))
    }

    fn alphabet(&self, problem: &AnalogyProblem) -> Result<&PermutedAlphabet, HarnessError> {
        self.alphabets
            .get(&problem.alphabet_id)
            .ok_or_else(|| HarnessError::Config(format!("unknown alphabet {:?}", problem.alphabet_id)))
    }

    pub fn reply(&self, problem: &AnalogyProblem, attempt: u32) -> Result<String, HarnessError> {
        let alphabet = self.alphabet(problem)?;
        let answer = match &problem.answer {
            Some(a) => a.clone(),
            None => solve(problem, alphabet).map_err(|e| HarnessError::Config(e.to_string()))?,
        };
        let text = match &self.policy {
            MockPolicy::Oracle => answer.to_string(),
            MockPolicy::Noisy(p) => {
                let mut rng = self.rng_for(&problem.id, attempt);
                if rng.random_bool(*p) {
                    answer.to_string()
                } else {
                    random_wrong(&mut rng, alphabet, &answer).to_string()
                }
            }
            MockPolicy::AlternativeRule(kind) => {
                let intended = intended_rule(problem);
                induce_rules(alphabet, &problem.source_a, &problem.source_b)
                    .into_iter()
                    .filter(|r| r.kind_name() == kind && *r != intended && !r.is_literal_copy())
                    .filter_map(|r| apply_rule(&r, alphabet, &problem.target_a))
                    .find(|out| *out != answer)
                    .unwrap_or(answer)
                    .to_string()
            }
            MockPolicy::RefuseN(n) => {
                if attempt < *n {
                    REFUSAL_TEXT.to_string()
                } else {
                    answer.to_string()
                }
            }
        };
        Ok(text)
    }
}

fn random_wrong<R: Rng>(rng: &mut R, alphabet: &PermutedAlphabet, answer: &LetterString) -> LetterString {
    loop {
        let s = LetterString(
            (0..answer.len())
                .map(|_| alphabet.letters()[rng.random_range(0..alphabet.letters().len())])
                .collect(),
        );
        if s != *answer {
            return s;
        }
    }
}

#[async_trait]
impl ChatModel for MockModel {
    async fn complete(&self, request: ChatRequest<'_>) -> Result<String, HarnessError> {
        self.reply(request.problem, request.attempt)
    }
}
