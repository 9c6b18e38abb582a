//! Chat-completion transports: a blocking HTTP client for OpenAI-compatible
//! endpoints, a directory-backed replay transport for mocked runs, and an
//! in-memory sequence transport for tests.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Endpoint settings for an LLM-backed firm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpointConfig {
    /// Base URL; the client posts to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Extra attempts after the first, for both transport and parse failures.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the API key. The key itself
    /// is never stored or logged.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_retries() -> u32 {
    3
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_owned()
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080/v1".to_owned(),
            model_name: "gpt-4".to_owned(),
            temperature: default_temperature(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            api_key_env: default_api_key_env(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request to {url} failed: {source}")]
    Http {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("endpoint returned status {status}: {body}")]
    BadStatus { status: u16, body: String },
    #[error("endpoint reply carried no choices")]
    EmptyReply,
    #[error("malformed endpoint reply: {0}")]
    MalformedReply(String),
    #[error("no mock fixture for run {run:?} period {period} firm {firm} under {dir}")]
    MissingFixture {
        run: String,
        period: usize,
        firm: usize,
        dir: PathBuf,
    },
    #[error("mock fixture read failed: {0}")]
    FixtureIo(#[from] std::io::Error),
    #[error("transport failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
}

/// Identifies one decision call so replay transports can key their fixtures.
#[derive(Debug, Clone)]
pub struct CallMeta {
    pub run_label: String,
    pub period: usize,
    pub firm: usize,
}

/// A blocking one-shot chat call. Implementations must be safe to share
/// across firms; each agent issues at most one call at a time.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, call: &CallMeta, prompt: &str) -> Result<String, TransportError>;
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// OpenAI-compatible chat-completions client. Sends a single user message
/// per call; the API key comes from the environment variable named in the
/// endpoint config and is attached as a bearer token when present.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    config: LlmEndpointConfig,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(config: LlmEndpointConfig) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|source| TransportError::Http {
                url: config.base_url.clone(),
                source,
            })?;
        let api_key = std::env::var(&config.api_key_env).ok();
        Ok(Self {
            client,
            config,
            api_key,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, _call: &CallMeta, prompt: &str) -> Result<String, TransportError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.config.model_name,
            temperature: self.config.temperature,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
        };
        let mut request = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|source| TransportError::Http {
            url: url.clone(),
            source,
        })?;
        let status = response.status();
        let text = response.text().map_err(|source| TransportError::Http {
            url: url.clone(),
            source,
        })?;
        if !status.is_success() {
            return Err(TransportError::BadStatus {
                status: status.as_u16(),
                body: text.chars().take(400).collect(),
            });
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| TransportError::MalformedReply(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or(TransportError::EmptyReply)
    }
}

/// Replays canned replies from a directory of text files keyed by
/// (run label, period, firm). Lookup order, first hit wins:
///
/// 1. `{run}_p{period}_f{firm}.txt`
/// 2. `p{period}_f{firm}.txt`
/// 3. `f{firm}.txt`
/// 4. `default.txt`
pub struct DirectoryTransport {
    dir: PathBuf,
}

impl DirectoryTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl ChatTransport for DirectoryTransport {
    fn complete(&self, call: &CallMeta, _prompt: &str) -> Result<String, TransportError> {
        let names = [
            format!("{}_p{}_f{}.txt", call.run_label, call.period, call.firm),
            format!("p{}_f{}.txt", call.period, call.firm),
            format!("f{}.txt", call.firm),
            "default.txt".to_owned(),
        ];
        for name in &names {
            let path = self.dir.join(name);
            if path.is_file() {
                return Ok(std::fs::read_to_string(path)?);
            }
        }
        Err(TransportError::MissingFixture {
            run: call.run_label.clone(),
            period: call.period,
            firm: call.firm,
            dir: self.dir.clone(),
        })
    }
}

/// In-memory transport that hands out scripted outcomes in order and repeats
/// the last one; `Err` entries simulate transport failures.
pub struct SequenceTransport {
    replies: Mutex<(usize, Vec<Result<String, String>>)>,
}

impl SequenceTransport {
    pub fn new(replies: Vec<Result<String, String>>) -> Self {
        assert!(!replies.is_empty(), "sequence transport needs at least one reply");
        Self {
            replies: Mutex::new((0, replies)),
        }
    }

    pub fn of_texts(texts: &[&str]) -> Self {
        Self::new(texts.iter().map(|t| Ok((*t).to_owned())).collect())
    }

    /// How many calls were made so far.
    pub fn calls(&self) -> usize {
        self.replies.lock().unwrap().0
    }
}

impl ChatTransport for SequenceTransport {
    fn complete(&self, _call: &CallMeta, _prompt: &str) -> Result<String, TransportError> {
        let mut guard = self.replies.lock().unwrap();
        let (served, replies) = &mut *guard;
        let index = (*served).min(replies.len() - 1);
        *served += 1;
        match &replies[index] {
            Ok(text) => Ok(text.clone()),
            Err(message) => Err(TransportError::MalformedReply(message.clone())),
        }
    }
}
