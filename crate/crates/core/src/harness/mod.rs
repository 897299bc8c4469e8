//! Running problem sets against chat-completion models.
//!
//! [`evaluate`] sends each problem's prompt to a [`ChatModel`], regenerates
//! replies that contain no parseable answer up to `max_retries` times, and
//! keeps the full transcript. Requests run concurrently up to the
//! endpoint's `parallelism`; records come back sorted by problem id.

mod mock;
mod openai;
mod prompt;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tokio::time::Instant;

pub use mock::{MockModel, MockPolicy};
pub use openai::OpenAiChat;
pub use prompt::{build_prompt, problem_rows, user_prompt, ChatMessage, PromptMode, DEFAULT_SYSTEM_MESSAGE};

use crate::alphabet::Alphabets;
use crate::classify::{parse_answer, ResponseRecord};
use crate::error::HarnessError;
use crate::problem::AnalogyProblem;

pub const DEFAULT_MAX_RETRIES: u32 = 5;
pub const DEFAULT_REQUESTS_PER_MINUTE: u32 = 30;

/// Connection and decoding settings, recorded with every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub engine: String,
    pub mode: PromptMode,
    pub temperature: f64,
    pub top_p: f64,
    /// Name of the environment variable holding the API key.
    pub auth_env: String,
    pub max_retries: u32,
    pub parallelism: usize,
    /// `None` disables rate limiting.
    pub requests_per_minute: Option<u32>,
}

impl ModelEndpoint {
    /// Plain mode decodes greedily (temperature and top-p 0); tool mode
    /// keeps the provider defaults of 1.
    pub fn new(engine: impl Into<String>, mode: PromptMode) -> Self {
        let (temperature, top_p) = match mode {
            PromptMode::Plain => (0.0, 0.0),
            PromptMode::ToolAugmented => (1.0, 1.0),
        };
        ModelEndpoint {
            base_url: "https://api.openai.com/v1".into(),
            engine: engine.into(),
            mode,
            temperature,
            top_p,
            auth_env: "OPENAI_API_KEY".into(),
            max_retries: DEFAULT_MAX_RETRIES,
            parallelism: 4,
            requests_per_minute: Some(DEFAULT_REQUESTS_PER_MINUTE),
        }
    }
}

/// One request: the problem being asked, the messages, and which attempt
/// this is (0 for the first).
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub problem: &'a AnalogyProblem,
    pub messages: &'a [ChatMessage],
    pub attempt: u32,
}

#[async_trait]
pub trait ChatModel: Send + Sync {
    async fn complete(&self, request: ChatRequest<'_>) -> Result<String, HarnessError>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRun {
    pub run_id: String,
    pub endpoint: ModelEndpoint,
    pub problem_set: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    #[serde(skip)]
    pub records: Vec<ResponseRecord>,
}

impl EvalRun {
    pub fn transport_failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Spaces request starts at least `60 / rpm` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_minute(rpm: u32) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(60.0 / rpm.max(1) as f64),
            next: Mutex::new(Instant::now()),
        }
    }

    pub async fn acquire(&self) {
        let at = {
            let mut next = self.next.lock().await;
            let at = (*next).max(Instant::now());
            *next = at + self.interval;
            at
        };
        tokio::time::sleep_until(at).await;
    }
}

async fn ask(
    problem: &AnalogyProblem,
    messages: Vec<ChatMessage>,
    endpoint: &ModelEndpoint,
    model: &dyn ChatModel,
    limiter: Option<&RateLimiter>,
) -> Result<ResponseRecord, HarnessError> {
    let mut record = ResponseRecord::new(&problem.id, &endpoint.engine, "");
    record.transcript = messages.clone();
    for attempt in 0..=endpoint.max_retries {
        if let Some(l) = limiter {
            l.acquire().await;
        }
        let request = ChatRequest {
            problem,
            messages: &messages,
            attempt,
        };
        match model.complete(request).await {
            Ok(text) => {
                record.transcript.push(ChatMessage::assistant(&text));
                record.raw_text = text;
                record.retries = attempt;
                if parse_answer(&record.raw_text).is_some() {
                    break;
                }
                tracing::debug!(problem = %problem.id, attempt, "no answer in reply, regenerating");
            }
            Err(HarnessError::Auth(msg)) => return Err(HarnessError::Auth(msg)),
            Err(e) => {
                record.retries = attempt;
                record.error = Some(e.to_string());
                break;
            }
        }
    }
    Ok(record)
}

/// Runs every problem through `model`. Transport failures are recorded on
/// the affected record; an authentication failure aborts the run.
pub async fn evaluate(
    problems: &[AnalogyProblem],
    alphabets: &Alphabets,
    endpoint: &ModelEndpoint,
    model: &dyn ChatModel,
    problem_set: &str,
) -> Result<EvalRun, HarnessError> {
    let started_at = Utc::now();
    let mut prompts = Vec::with_capacity(problems.len());
    for p in problems {
        let alphabet = alphabets
            .get(&p.alphabet_id)
            .ok_or_else(|| HarnessError::Config(format!("unknown alphabet {:?}", p.alphabet_id)))?;
        prompts.push((p, build_prompt(p, alphabet, endpoint.mode)));
    }
    let limiter = endpoint.requests_per_minute.map(|rpm| Arc::new(RateLimiter::per_minute(rpm)));

    let mut records: Vec<ResponseRecord> = stream::iter(prompts)
        .map(|(p, messages)| {
            let limiter = limiter.clone();
            async move { ask(p, messages, endpoint, model, limiter.as_deref()).await }
        })
        .buffer_unordered(endpoint.parallelism.max(1))
        .try_collect()
        .await?;
    records.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));

    Ok(EvalRun {
        run_id: format!("{}-{}", endpoint.engine, started_at.format("%Y%m%dT%H%M%SZ")),
        endpoint: endpoint.clone(),
        problem_set: problem_set.to_string(),
        started_at,
        finished_at: Utc::now(),
        records,
    })
}
