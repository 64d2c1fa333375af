//! Chat-completion clients: an HTTP client for OpenAI-style endpoints, a
//! canned-reply mock, a closure adapter for tests, and an in-flight limiter.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Environment variable holding the endpoint API key. Overrides any key in config.
pub const API_KEY_ENV: &str = "MEOW_API_KEY";

/// The fixed reply the engine writes after every broadcast.
pub const CONFIRMATION: &str = "Okay, I see.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: ChatRole,
    pub content: String,
}

impl ChatTurn {
    pub fn system(content: impl Into<String>) -> Self {
        ChatTurn {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatTurn {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatTurn {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// A conversation that never holds two assistant turns in a row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript(Vec<ChatTurn>);

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, turn: ChatTurn) -> Result<(), ChatError> {
        if turn.role == ChatRole::Assistant
            && self.0.last().is_some_and(|t| t.role == ChatRole::Assistant)
        {
            return Err(ChatError::Protocol(
                "two consecutive assistant turns".into(),
            ));
        }
        self.0.push(turn);
        Ok(())
    }

    pub fn push_user(&mut self, content: impl Into<String>) {
        self.0.push(ChatTurn::user(content));
    }

    /// A system broadcast followed by the engine-written confirmation.
    pub fn push_broadcast(&mut self, payload: &str) {
        self.0.push(ChatTurn::user(format!("(system)({payload})")));
        self.0.push(ChatTurn::assistant(CONFIRMATION));
    }

    pub fn turns(&self) -> &[ChatTurn] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last_user(&self) -> Option<&str> {
        self.0
            .iter()
            .rev()
            .find(|t| t.role == ChatRole::User)
            .map(|t| t.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.8,
            top_p: 0.85,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ChatError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    Protocol(String),
    #[error("no chat client configured")]
    Unconfigured,
}

pub trait ChatClient: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatTurn],
        sampling: &SamplingParams,
    ) -> Result<String, ChatError>;
}

impl<C: ChatClient + ?Sized> ChatClient for Arc<C> {
    fn complete(
        &self,
        messages: &[ChatTurn],
        sampling: &SamplingParams,
    ) -> Result<String, ChatError> {
        (**self).complete(messages, sampling)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(
        &self,
        messages: &[ChatTurn],
        sampling: &SamplingParams,
    ) -> Result<String, ChatError> {
        (**self).complete(messages, sampling)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatTurn>,
    pub temperature: f64,
    pub top_p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatChoice {
    pub message: ChatTurn,
}

/// Endpoint settings shared by player agents and the judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatClientConfig {
    /// `http(s)://…` for a live endpoint, `mock:<file>` for canned replies.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl Default for ChatClientConfig {
    fn default() -> Self {
        ChatClientConfig {
            endpoint: String::new(),
            model: "default".into(),
            temperature: 0.8,
            top_p: 0.85,
            api_key: None,
            max_in_flight: 4,
            max_retries: 2,
            timeout_secs: 120,
        }
    }
}

impl ChatClientConfig {
    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            top_p: self.top_p,
        }
    }

    /// The API key, with the environment variable taking precedence.
    pub fn resolved_api_key(&self) -> Option<String> {
        std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .or_else(|| self.api_key.clone())
    }
}

/// Builds the client named by `config.endpoint`, wrapped in an in-flight limiter.
pub fn client_from_config(config: &ChatClientConfig) -> Result<Arc<dyn ChatClient>, ChatError> {
    let cap = config.max_in_flight.max(1);
    if let Some(path) = config.endpoint.strip_prefix("mock:") {
        let mock = MockChatClient::from_file(Path::new(path))?;
        return Ok(Arc::new(Throttled::new(mock, cap)));
    }
    if config.endpoint.starts_with("http://") || config.endpoint.starts_with("https://") {
        let http = HttpChatClient::new(config);
        return Ok(Arc::new(Throttled::new(http, cap)));
    }
    if config.endpoint.is_empty() {
        return Err(ChatError::Unconfigured);
    }
    Err(ChatError::Transport(format!(
        "unsupported endpoint {:?}",
        config.endpoint
    )))
}

/// Blocking client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
}

impl HttpChatClient {
    pub fn new(config: &ChatClientConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChatClient {
            agent,
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            api_key: config.resolved_api_key(),
            max_retries: config.max_retries,
        }
    }

    fn attempt(&self, body: &ChatRequest) -> Result<String, (bool, ChatError)> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| (true, ChatError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err((true, ChatError::Transport(format!("HTTP {status}"))));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err((false, ChatError::Protocol(format!("HTTP {status}: {text}"))));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, ChatError::Protocol(e.to_string())))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| (false, ChatError::Protocol("response has no choices".into())))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(
        &self,
        messages: &[ChatTurn],
        sampling: &SamplingParams,
    ) -> Result<String, ChatError> {
        let body = ChatRequest {
            model: self.model.clone(),
            messages: messages.to_vec(),
            temperature: sampling.temperature,
            top_p: sampling.top_p,
        };
        let mut delay = Duration::from_millis(250);
        let mut tries = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retryable, err)) => {
                    if !retryable || tries >= self.max_retries {
                        return Err(err);
                    }
                    log::warn!("chat request failed ({err}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
            }
        }
    }
}

/// Directive in a mock script: answer with whoever the latest expert
/// observation names.
pub const DEFER_TO_EXPERT: &str = "@expert";

const EXPERT_LEAD: &str = "According to the judgment of game experts, ";

/// Replies from a fixed list, cycled. A reply equal to [`DEFER_TO_EXPERT`]
/// repeats the player named in the latest expert observation.
pub struct MockChatClient {
    replies: Vec<String>,
    cursor: AtomicUsize,
}

impl MockChatClient {
    pub fn new(replies: Vec<String>) -> Self {
        MockChatClient {
            replies,
            cursor: AtomicUsize::new(0),
        }
    }

    /// One reply per non-empty line; a literal `\n` becomes a newline.
    pub fn parse_script(text: &str) -> Vec<String> {
        text.lines()
            .map(str::trim_end)
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.replace("\\n", "\n"))
            .collect()
    }

    pub fn from_file(path: &Path) -> Result<Self, ChatError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChatError::Transport(format!("mock script {}: {e}", path.display())))?;
        let replies = Self::parse_script(&text);
        if replies.is_empty() {
            return Err(ChatError::Transport(format!(
                "mock script {} has no replies",
                path.display()
            )));
        }
        Ok(Self::new(replies))
    }

    pub fn calls(&self) -> usize {
        self.cursor.load(Ordering::SeqCst)
    }
}

/// Name following the expert-observation lead-in of the latest user turn that has one.
pub fn expert_pick(messages: &[ChatTurn]) -> Option<String> {
    messages
        .iter()
        .rev()
        .filter(|t| t.role == ChatRole::User)
        .find_map(|t| {
            let at = t.content.find(EXPERT_LEAD)?;
            let rest = &t.content[at + EXPERT_LEAD.len()..];
            rest.split_whitespace().next().map(str::to_string)
        })
}

impl ChatClient for MockChatClient {
    fn complete(
        &self,
        messages: &[ChatTurn],
        _sampling: &SamplingParams,
    ) -> Result<String, ChatError> {
        if self.replies.is_empty() {
            return Err(ChatError::Unconfigured);
        }
        let i = self.cursor.fetch_add(1, Ordering::SeqCst) % self.replies.len();
        let reply = &self.replies[i];
        if reply.trim() == DEFER_TO_EXPERT {
            return Ok(match expert_pick(messages) {
                Some(name) => format!("I agree with the experts. My final answer is {name}."),
                None => "I'm not certain.".to_string(),
            });
        }
        Ok(reply.clone())
    }
}

/// Adapts a closure into a client.
pub struct FnClient<F>(pub F);

impl<F> ChatClient for FnClient<F>
where
    F: Fn(&[ChatTurn]) -> Result<String, ChatError> + Send + Sync,
{
    fn complete(
        &self,
        messages: &[ChatTurn],
        _sampling: &SamplingParams,
    ) -> Result<String, ChatError> {
        (self.0)(messages)
    }
}

/// Caps the number of concurrent requests reaching the inner client.
pub struct Throttled<C> {
    inner: C,
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl<C> Throttled<C> {
    pub fn new(inner: C, cap: usize) -> Self {
        Throttled {
            inner,
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: ChatClient> ChatClient for Throttled<C> {
    fn complete(
        &self,
        messages: &[ChatTurn],
        sampling: &SamplingParams,
    ) -> Result<String, ChatError> {
        {
            let mut n = self.in_flight.lock().unwrap();
            while *n >= self.cap {
                n = self.freed.wait(n).unwrap();
            }
            *n += 1;
        }
        let out = self.inner.complete(messages, sampling);
        *self.in_flight.lock().unwrap() -= 1;
        self.freed.notify_one();
        out
    }
}
