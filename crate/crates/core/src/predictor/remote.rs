//! Chat-completion client for served fine-tuned models.
//!
//! One POST per completion carrying `{model, messages, temperature}` with a
//! single user message; the reply's first choice supplies the text. Sampling
//! temperature is always 0 and cannot be configured.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{BackendResponse, PredictionQuery, PredictorBackend};
use super::parse::parse_model_output;
use super::prompt::{build_prompt, PromptTemplate};
use super::PredictError;

fn default_path() -> String {
    "/v1/chat/completions".into()
}
fn default_auth_header() -> String {
    "Authorization".into()
}
fn default_auth_scheme() -> String {
    "Bearer".into()
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    3
}
fn default_max_concurrent() -> usize {
    4
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_backoff_cap_ms() -> u64 {
    20_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteEndpointConfig {
    pub base_url: String,
    #[serde(default = "default_path")]
    pub path: String,
    pub model: String,
    /// Name of the environment variable holding the API token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    /// Prefix of the header value; empty sends the bare token.
    #[serde(default = "default_auth_scheme")]
    pub auth_scheme: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_backoff_cap_ms")]
    pub backoff_cap_ms: u64,
}

impl RemoteEndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            path: default_path(),
            model: model.into(),
            auth_env: None,
            auth_header: default_auth_header(),
            auth_scheme: default_auth_scheme(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            max_concurrent: default_max_concurrent(),
            backoff_base_ms: default_backoff_ms(),
            backoff_cap_ms: default_backoff_cap_ms(),
        }
    }

    pub const fn temperature(&self) -> f64 {
        0.0
    }

    pub fn url(&self) -> String {
        format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            self.path.trim_start_matches('/')
        )
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(
            self.backoff_base_ms
                .saturating_mul(factor)
                .min(self.backoff_cap_ms),
        )
    }

    fn agent(&self) -> ureq::Agent {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(self.timeout_ms)))
            .http_status_as_error(false)
            .build();
        ureq::Agent::new_with_config(config)
    }

    fn auth_value(&self) -> Result<Option<String>, PredictError> {
        let Some(var) = &self.auth_env else {
            return Ok(None);
        };
        let token = std::env::var(var)
            .map_err(|_| PredictError::Auth(format!("environment variable {var} is not set")))?;
        Ok(Some(if self.auth_scheme.is_empty() {
            token
        } else {
            format!("{} {}", self.auth_scheme, token)
        }))
    }
}

#[derive(Deserialize)]
struct CompletionMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: CompletionMessage,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(PredictError),
}

fn attempt(
    agent: &ureq::Agent,
    config: &RemoteEndpointConfig,
    auth: Option<&str>,
    body: &str,
) -> Attempt {
    let mut request = agent
        .post(config.url())
        .header("Content-Type", "application/json");
    if let Some(value) = auth {
        request = request.header(config.auth_header.as_str(), value);
    }
    let mut response = match request.send(body) {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    let status = response.status().as_u16();
    let text = match response.body_mut().read_to_string() {
        Ok(t) => t,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    match status {
        200..=299 => match serde_json::from_str::<CompletionResponse>(&text) {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(CompletionChoice {
                    message: CompletionMessage { content: Some(c) },
                }) => Attempt::Done(c),
                _ => Attempt::Fail(PredictError::UnparseableResponse(text)),
            },
            Err(_) => Attempt::Fail(PredictError::UnparseableResponse(text)),
        },
        401 | 403 => Attempt::Fail(PredictError::Auth(format!("http status {status}"))),
        408 | 429 | 500..=599 => Attempt::Retry(format!("http status {status}")),
        _ => Attempt::Fail(PredictError::BackendUnavailable(format!(
            "http status {status}: {text}"
        ))),
    }
}

fn request_body(config: &RemoteEndpointConfig, prompt: &str) -> String {
    json!({
        "model": config.model,
        "messages": [{ "role": "user", "content": prompt }],
        "temperature": 0,
    })
    .to_string()
}

fn complete_with(
    agent: &ureq::Agent,
    config: &RemoteEndpointConfig,
    prompt: &str,
) -> Result<String, PredictError> {
    let auth = config.auth_value()?;
    let body = request_body(config, prompt);
    let mut last = String::new();
    for n in 0..=config.max_retries {
        if n > 0 {
            std::thread::sleep(config.backoff(n - 1));
        }
        match attempt(agent, config, auth.as_deref(), &body) {
            Attempt::Done(text) => return Ok(text),
            Attempt::Fail(e) => return Err(e),
            Attempt::Retry(reason) => {
                log::debug!("transient failure from {}: {reason}", config.url());
                last = reason;
            }
        }
    }
    Err(PredictError::BackendUnavailable(format!(
        "{} attempts failed, last: {last}",
        config.max_retries + 1
    )))
}

/// Sends one completion request, retrying transient failures (transport
/// errors, 408, 429, 5xx) with exponential backoff.
pub fn remote_complete(
    config: &RemoteEndpointConfig,
    prompt: &str,
) -> Result<String, PredictError> {
    complete_with(&config.agent(), config, prompt)
}

/// A served model queried through [`remote_complete`].
pub struct RemoteBackend {
    config: RemoteEndpointConfig,
    template: PromptTemplate,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteEndpointConfig, template: PromptTemplate) -> Self {
        let agent = config.agent();
        Self {
            config,
            template,
            agent,
        }
    }

    pub fn config(&self) -> &RemoteEndpointConfig {
        &self.config
    }
}

impl PredictorBackend for RemoteBackend {
    fn name(&self) -> String {
        format!("remote:{}", self.config.model)
    }

    fn respond(&self, query: &PredictionQuery) -> Result<BackendResponse, PredictError> {
        let prompt = build_prompt(query, &self.template)?;
        let text = complete_with(&self.agent, &self.config, &prompt)?;
        let choice = parse_model_output(&text, &query.first.text, &query.second.text)?;
        Ok(BackendResponse {
            choice,
            raw: Some(text),
        })
    }

    fn max_concurrency(&self) -> usize {
        self.config.max_concurrent.max(1)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
