use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{ChatMessage, ChatModel, ChatRequest, ModelEndpoint, PromptMode};
use crate::error::HarnessError;

/// Client for an OpenAI-compatible `/chat/completions` endpoint. Tool mode
/// sends the same request with a code-interpreter tool attached.
#[derive(Debug, Clone)]
pub struct OpenAiChat {
    client: reqwest::Client,
    endpoint: ModelEndpoint,
    api_key: String,
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tools: Option<Vec<serde_json::Value>>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

impl OpenAiChat {
    /// Reads the key from the endpoint's `auth_env` variable.
    pub fn from_env(endpoint: ModelEndpoint) -> Result<Self, HarnessError> {
        let api_key = std::env::var(&endpoint.auth_env).map_err(|_| {
            HarnessError::Auth(format!("environment variable {} is not set", endpoint.auth_env))
        })?;
        Self::with_key(endpoint, api_key)
    }

    pub fn with_key(endpoint: ModelEndpoint, api_key: String) -> Result<Self, HarnessError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(OpenAiChat {
            client,
            endpoint,
            api_key,
        })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'))
    }
}

#[async_trait]
impl ChatModel for OpenAiChat {
    async fn complete(&self, request: ChatRequest<'_>) -> Result<String, HarnessError> {
        let body = CompletionBody {
            model: &self.endpoint.engine,
            messages: request.messages,
            temperature: self.endpoint.temperature,
            top_p: self.endpoint.top_p,
            tools: (self.endpoint.mode == PromptMode::ToolAugmented)
                .then(|| vec![serde_json::json!({ "type": "code_interpreter" })]),
        };
        let resp = self
            .client
            .post(self.url())
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| HarnessError::Transport(e.to_string()))?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(HarnessError::Auth(format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            return Err(HarnessError::Transport(format!("endpoint returned {status}: {text}")));
        }
        let parsed: CompletionResponse = resp
            .json()
            .await
            .map_err(|e| HarnessError::Transport(format!("malformed completion: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| HarnessError::Transport("completion had no choices".into()))
    }
}
