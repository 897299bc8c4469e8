//! Participant experiment backend.
//!
//! Each session gets one problem per transformation type from the
//! deployment's interval condition, in random order. Every state change is
//! appended to the session's own JSONL event log before it takes effect in
//! memory, so a restarted server rebuilds all sessions by replaying the
//! logs. Answer keys never leave the server.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use counterfax_core::alphabet::Alphabets;
use counterfax_core::classify::ResponseRecord;
use counterfax_core::problem::read_problems;
use counterfax_core::{AnalogyProblem, IntervalSize, TransformationType};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::ServeArgs;

/// Rows of the worked example shown with the instructions.
pub const INSTRUCTION_EXAMPLE: [&str; 2] = ["[a a a] [b b b]", "[c c c] [ ? ]"];

pub const INSTRUCTIONS: &str = "In this study you will solve six letter-string puzzles. Each puzzle \
uses the alphabet shown above it. Look at how the first string changes into the second, then type \
the string that completes the pattern for the third. Please switch to full-screen mode and turn off \
music or other distractions before you begin.";

/// Attention-check bank: exactly one vegetable.
pub const ATTENTION_ITEMS: [(&str, bool); 5] = [
    ("apple", false),
    ("banana", false),
    ("carrot", true),
    ("grape", false),
    ("strawberry", false),
];

pub const PROBLEMS_PER_SESSION: usize = TransformationType::ALL.len();

pub struct ServeConfig {
    pub problems: Vec<AnalogyProblem>,
    pub interval: IntervalSize,
    pub responses_path: PathBuf,
    pub store_dir: PathBuf,
    pub seed: u64,
    pub assets: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        session_id: String,
        interval: IntervalSize,
        problem_ids: Vec<String>,
        attention_items: Vec<String>,
        completion_code: String,
        at: DateTime<Utc>,
    },
    Served {
        index: usize,
        at: DateTime<Utc>,
    },
    Response {
        index: usize,
        problem_id: String,
        raw_text: String,
        at: DateTime<Utc>,
        response_ms: Option<u64>,
    },
    Attention {
        choice: String,
        passed: bool,
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone)]
struct Session {
    id: String,
    problem_ids: Vec<String>,
    attention_items: Vec<String>,
    completion_code: String,
    answered: usize,
    served_at: Option<DateTime<Utc>>,
    attention: Option<bool>,
}

impl Session {
    fn apply(&mut self, event: &Event) {
        match event {
            Event::Created { .. } => {}
            Event::Served { at, .. } => self.served_at = Some(*at),
            Event::Response { .. } => {
                self.answered += 1;
                self.served_at = None;
            }
            Event::Attention { passed, .. } => self.attention = Some(*passed),
        }
    }

    fn finished_problems(&self) -> bool {
        self.answered >= self.problem_ids.len()
    }
}

struct Inner {
    sessions: HashMap<String, Session>,
    rng: ChaCha8Rng,
}

pub struct AppState {
    config: ServeConfig,
    alphabets: Alphabets,
    by_id: HashMap<String, AnalogyProblem>,
    pools: Vec<Vec<String>>,
    inner: Mutex<Inner>,
}

fn session_log(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}

/// Appends one line with a single write.
fn append_line<T: Serialize>(path: &Path, item: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_string(item).map_err(std::io::Error::other)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.sync_data()
}

fn replay(dir: &Path) -> Result<HashMap<String, Session>> {
    let mut sessions = HashMap::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let events: Vec<Event> = counterfax_core::jsonl::read(&path)?;
        let Some(Event::Created {
            session_id,
            problem_ids,
            attention_items,
            completion_code,
            ..
        }) = events.first().cloned()
        else {
            bail!("{} does not start with a session creation event", path.display());
        };
        let mut s = Session {
            id: session_id.clone(),
            problem_ids,
            attention_items,
            completion_code,
            answered: 0,
            served_at: None,
            attention: None,
        };
        for e in &events[1..] {
            s.apply(e);
        }
        sessions.insert(session_id, s);
    }
    Ok(sessions)
}

impl AppState {
    pub fn new(config: ServeConfig) -> Result<Arc<Self>> {
        let pools: Vec<Vec<String>> = TransformationType::ALL
            .iter()
            .map(|t| {
                config
                    .problems
                    .iter()
                    .filter(|p| p.interval == config.interval && p.transformation == *t)
                    .map(|p| p.id.clone())
                    .collect()
            })
            .collect();
        for (t, pool) in TransformationType::ALL.iter().zip(&pools) {
            if pool.is_empty() {
                bail!("problem set has no {t} problems at interval {}", config.interval);
            }
        }
        std::fs::create_dir_all(&config.store_dir)
            .with_context(|| format!("creating session store {}", config.store_dir.display()))?;
        let sessions = replay(&config.store_dir)?;
        let by_id = config.problems.iter().map(|p| (p.id.clone(), p.clone())).collect();
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Arc::new(AppState {
            config,
            alphabets: Alphabets::default(),
            by_id,
            pools,
            inner: Mutex::new(Inner { sessions, rng }),
        }))
    }

    pub async fn session_count(&self) -> usize {
        self.inner.lock().await.sessions.len()
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no session {id}"))
}

fn conflict(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::CONFLICT, msg.into())
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

/// Strict JSON body parsing; anything malformed is a 400.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = if body.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSessionBody {
    /// Recruitment-platform id, kept only in the event log.
    #[serde(default)]
    external_id: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseBody {
    problem_id: String,
    answer: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttentionBody {
    choice: String,
}

fn instructions_json() -> Value {
    json!({ "text": INSTRUCTIONS, "example": INSTRUCTION_EXAMPLE })
}

async fn instructions() -> Json<Value> {
    Json(instructions_json())
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let body: NewSessionBody = parse_body(&body)?;
    let mut inner = state.inner.lock().await;
    let Inner { sessions, rng } = &mut *inner;
    let id = loop {
        let candidate = format!("p{:016x}", rng.random::<u64>());
        if !sessions.contains_key(&candidate) && !session_log(&state.config.store_dir, &candidate).exists() {
            break candidate;
        }
    };
    let mut problem_ids: Vec<String> = state
        .pools
        .iter()
        .map(|pool| pool.choose(rng).expect("pools are non-empty").clone())
        .collect();
    problem_ids.shuffle(rng);
    let mut attention_items: Vec<String> = ATTENTION_ITEMS.iter().map(|(l, _)| l.to_string()).collect();
    attention_items.shuffle(rng);
    let completion_code = format!("{:08X}", rng.random::<u32>());
    let event = Event::Created {
        session_id: id.clone(),
        interval: state.config.interval,
        problem_ids: problem_ids.clone(),
        attention_items: attention_items.clone(),
        completion_code: completion_code.clone(),
        at: Utc::now(),
    };
    let log = session_log(&state.config.store_dir, &id);
    append_line(&log, &event).map_err(internal)?;
    if let Some(ext) = body.external_id {
        append_line(&log.with_extension("external"), &json!({ "session_id": id, "external_id": ext }))
            .map_err(internal)?;
    }
    sessions.insert(
        id.clone(),
        Session {
            id: id.clone(),
            problem_ids,
            attention_items,
            completion_code,
            answered: 0,
            served_at: None,
            attention: None,
        },
    );
    let payload = json!({
        "session_id": id,
        "interval": state.config.interval,
        "total_problems": PROBLEMS_PER_SESSION,
        "instructions": instructions_json(),
    });
    Ok((StatusCode::CREATED, Json(payload)).into_response())
}

fn problem_view(state: &AppState, problem: &AnalogyProblem, index: usize, total: usize) -> Value {
    let alphabet = state.alphabets.get(&problem.alphabet_id).map(|a| a.to_line());
    json!({
        "stage": "problem",
        "index": index + 1,
        "total": total,
        "problem": {
            "problem_id": problem.id,
            "alphabet": alphabet,
            "source_a": problem.source_a,
            "source_b": problem.source_b,
            "target_a": problem.target_a,
            "rows": [
                format!("{} {}", problem.source_a, problem.source_b),
                format!("{} [ ? ]", problem.target_a),
            ],
        },
    })
}

async fn next_problem(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let mut inner = state.inner.lock().await;
    let session = inner.sessions.get_mut(&id).ok_or_else(|| not_found(&id))?;
    if !session.finished_problems() {
        let index = session.answered;
        let problem = state
            .by_id
            .get(&session.problem_ids[index])
            .ok_or_else(|| internal("session refers to a problem that is no longer loaded"))?;
        if session.served_at.is_none() {
            let event = Event::Served { index, at: Utc::now() };
            append_line(&session_log(&state.config.store_dir, &id), &event).map_err(internal)?;
            session.apply(&event);
        }
        return Ok(Json(problem_view(&state, problem, index, session.problem_ids.len())));
    }
    Ok(Json(match session.attention {
        None => json!({ "stage": "attention", "items": session.attention_items }),
        Some(_) => json!({ "stage": "complete", "completion_code": session.completion_code }),
    }))
}

async fn submit_response(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let mut inner = state.inner.lock().await;
    let session = inner.sessions.get_mut(&id).ok_or_else(|| not_found(&id))?;
    let body: ResponseBody = parse_body(&body)?;
    if body.answer.trim().is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "empty answer".into()));
    }
    if session.finished_problems() {
        return Err(conflict("all problems have been answered"));
    }
    let index = session.answered;
    let expected = &session.problem_ids[index];
    if body.problem_id != *expected {
        return Err(conflict(format!(
            "expected an answer to problem {} of {}",
            index + 1,
            session.problem_ids.len()
        )));
    }
    let at = Utc::now();
    let response_ms = session
        .served_at
        .map(|s| (at - s).num_milliseconds().max(0) as u64);
    let event = Event::Response {
        index,
        problem_id: body.problem_id.clone(),
        raw_text: body.answer.clone(),
        at,
        response_ms,
    };
    append_line(&session_log(&state.config.store_dir, &id), &event).map_err(internal)?;
    let mut record = ResponseRecord::new(&body.problem_id, &session.id, &body.answer).human();
    record.submitted_at = Some(at);
    record.response_ms = response_ms;
    append_line(&state.config.responses_path, &record).map_err(internal)?;
    session.apply(&event);
    Ok(Json(json!({
        "accepted": true,
        "answered": session.answered,
        "total": session.problem_ids.len(),
    })))
}

async fn submit_attention(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let mut inner = state.inner.lock().await;
    let session = inner.sessions.get_mut(&id).ok_or_else(|| not_found(&id))?;
    let body: AttentionBody = parse_body(&body)?;
    if !session.finished_problems() {
        return Err(conflict("the attention check comes after all problems"));
    }
    if session.attention.is_some() {
        return Err(conflict("attention check already answered"));
    }
    let Some((_, passed)) = ATTENTION_ITEMS.iter().find(|(label, _)| *label == body.choice) else {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("unknown item {:?}", body.choice)));
    };
    let event = Event::Attention {
        choice: body.choice,
        passed: *passed,
        at: Utc::now(),
    };
    append_line(&session_log(&state.config.store_dir, &id), &event).map_err(internal)?;
    session.apply(&event);
    Ok(Json(json!({ "recorded": true })))
}

async fn complete(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let inner = state.inner.lock().await;
    let session = inner.sessions.get(&id).ok_or_else(|| not_found(&id))?;
    if !session.finished_problems() || session.attention.is_none() {
        return Err(conflict("session is not finished"));
    }
    Ok(Json(json!({
        "session_id": session.id,
        "completion_code": session.completion_code,
        "responses": session.answered,
    })))
}

pub fn router(state: Arc<AppState>) -> Router {
    let assets = state.config.assets.clone();
    let api = Router::new()
        .route("/instructions", get(instructions))
        .route("/session", post(create_session))
        .route("/session/{id}/next", get(next_problem))
        .route("/session/{id}/response", post(submit_response))
        .route("/session/{id}/attention", post(submit_attention))
        .route("/session/{id}/complete", get(complete))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub(crate) async fn serve(args: ServeArgs) -> Result<()> {
    let problems = read_problems(&args.problems)?;
    let config = ServeConfig {
        problems,
        interval: args.interval,
        responses_path: args.out,
        store_dir: args.store,
        seed: args.seed.unwrap_or_else(rand::random),
        assets: args.assets,
    };
    let state = AppState::new(config)?;
    let resumed = state.session_count().await;
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
        .await
        .with_context(|| format!("binding {}:{}", args.host, args.port))?;
    eprintln!(
        "serving interval {} on http://{} ({resumed} sessions resumed)",
        args.interval,
        listener.local_addr()?
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
