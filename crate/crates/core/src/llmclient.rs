//! The only module that talks to the network.
//!
//! Chat completions and embeddings use OpenAI-compatible JSON over HTTP with
//! a configurable base URL. Transient transport failures are retried twice
//! with exponential backoff inside a 30 s per-call deadline, and in-flight
//! requests are bounded per client.

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

pub const ENV_LLM_BASE_URL: &str = "CUP_LLM_BASE_URL";
pub const ENV_LLM_MODEL: &str = "CUP_LLM_MODEL";
pub const ENV_LLM_TOKEN: &str = "CUP_LLM_TOKEN";
pub const ENV_EMBED_BASE_URL: &str = "CUP_EMBED_BASE_URL";
pub const ENV_EMBED_MODEL: &str = "CUP_EMBED_MODEL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("endpoint not configured: {0}")]
    NotConfigured(&'static str),
    #[error("deadline exceeded")]
    Timeout,
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("HTTP {0}: {1}")]
    Status(u16, String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("could not parse structured reply: {0}")]
    Parse(String),
    #[error("template error: {0}")]
    Template(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("HTTP {0}: {1}")]
    Status(u16, String),
    #[error("bad body: {0}")]
    Body(String),
}

impl TransportError {
    fn is_transient(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Connect(_) => true,
            TransportError::Status(code, _) => *code == 429 || *code >= 500,
            TransportError::Body(_) => false,
        }
    }
}

impl From<TransportError> for LlmError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Timeout => LlmError::Timeout,
            TransportError::Connect(m) => LlmError::Transport(m),
            TransportError::Status(c @ (401 | 403), _) => LlmError::Auth(c),
            TransportError::Status(c, m) => LlmError::Status(c, m),
            TransportError::Body(m) => LlmError::Malformed(m),
        }
    }
}

/// Sends one JSON POST and returns the decoded JSON reply.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        body: &Value,
        token: Option<&str>,
        timeout: Duration,
    ) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        body: &Value,
        token: Option<&str>,
        timeout: Duration,
    ) -> Result<Value, TransportError> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Connect(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Body(e.to_string())
            }
        })?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status(status, truncate(&text, 200)));
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Body(e.to_string()))
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub token: Option<String>,
    pub deadline: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            token: None,
            deadline: Duration::from_secs(30),
            max_retries: 2,
            backoff: Duration::from_millis(250),
            max_in_flight: 4,
        }
    }

    /// Chat endpoint from `CUP_LLM_BASE_URL`, `CUP_LLM_MODEL`, `CUP_LLM_TOKEN`.
    pub fn chat_from_env() -> Result<Self, LlmError> {
        let base = std::env::var(ENV_LLM_BASE_URL).map_err(|_| LlmError::NotConfigured(ENV_LLM_BASE_URL))?;
        let model = std::env::var(ENV_LLM_MODEL).map_err(|_| LlmError::NotConfigured(ENV_LLM_MODEL))?;
        let mut cfg = Self::new(base, model);
        cfg.token = std::env::var(ENV_LLM_TOKEN).ok();
        Ok(cfg)
    }

    /// Embedding endpoint; shares `CUP_LLM_TOKEN` for auth.
    pub fn embed_from_env() -> Result<Self, LlmError> {
        let base = std::env::var(ENV_EMBED_BASE_URL).map_err(|_| LlmError::NotConfigured(ENV_EMBED_BASE_URL))?;
        let model = std::env::var(ENV_EMBED_MODEL).map_err(|_| LlmError::NotConfigured(ENV_EMBED_MODEL))?;
        let mut cfg = Self::new(base, model);
        cfg.token = std::env::var(ENV_LLM_TOKEN).ok();
        Ok(cfg)
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Shared retry loop: transient errors are retried with exponential backoff
/// until the retry count or the deadline runs out.
fn call_with_retries(
    cfg: &EndpointConfig,
    transport: &dyn Transport,
    gate: &Gate,
    url: &str,
    body: &Value,
) -> Result<Value, LlmError> {
    let _permit = gate.acquire();
    let start = Instant::now();
    let mut attempt = 0;
    loop {
        let remaining = cfg
            .deadline
            .checked_sub(start.elapsed())
            .filter(|d| !d.is_zero())
            .ok_or(LlmError::Timeout)?;
        match transport.post_json(url, body, cfg.token.as_deref(), remaining) {
            Ok(v) => {
                if start.elapsed() > cfg.deadline {
                    return Err(LlmError::Timeout);
                }
                return Ok(v);
            }
            Err(e) if e.is_transient() && attempt < cfg.max_retries => {
                let wait = cfg.backoff * 2u32.pow(attempt);
                if start.elapsed() + wait >= cfg.deadline {
                    return Err(LlmError::Timeout);
                }
                std::thread::sleep(wait);
                attempt += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub messages: Vec<ChatMessage>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatExchange {
    /// Single user message at temperature 0.
    pub fn user(model: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            messages: vec![ChatMessage {
                role: Role::User,
                content: content.into(),
            }],
            model: model.into(),
            temperature: 0.0,
            max_tokens: 512,
        }
    }
}

/// Anything that can answer a chat exchange.
pub trait ChatModel: Send + Sync {
    fn model_name(&self) -> &str;
    fn complete(&self, x: &ChatExchange) -> Result<String, LlmError>;
}

impl<T: ChatModel + ?Sized> ChatModel for &T {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }

    fn complete(&self, x: &ChatExchange) -> Result<String, LlmError> {
        (**self).complete(x)
    }
}

pub struct LlmClient {
    cfg: EndpointConfig,
    transport: Arc<dyn Transport>,
    gate: Gate,
}

impl LlmClient {
    pub fn new(cfg: EndpointConfig, transport: Arc<dyn Transport>) -> Self {
        let gate = Gate::new(cfg.max_in_flight);
        Self { cfg, transport, gate }
    }

    pub fn over_http(cfg: EndpointConfig) -> Result<Self, LlmError> {
        Ok(Self::new(cfg, Arc::new(HttpTransport::new()?)))
    }

    pub fn from_env() -> Result<Self, LlmError> {
        Self::over_http(EndpointConfig::chat_from_env()?)
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    /// A single user-turn exchange against the configured model.
    pub fn exchange(&self, prompt: impl Into<String>) -> ChatExchange {
        ChatExchange::user(self.cfg.model.clone(), prompt)
    }
}

impl ChatModel for LlmClient {
    fn model_name(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, x: &ChatExchange) -> Result<String, LlmError> {
        if x.messages.is_empty() {
            return Err(LlmError::Template("exchange has no messages".into()));
        }
        let body = json!({
            "model": x.model,
            "messages": x.messages,
            "temperature": x.temperature,
            "max_tokens": x.max_tokens,
        });
        let url = self.cfg.url("chat/completions");
        let reply = call_with_retries(&self.cfg, self.transport.as_ref(), &self.gate, &url, &body)?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))
    }
}

pub struct EmbeddingClient {
    cfg: EndpointConfig,
    transport: Arc<dyn Transport>,
    gate: Gate,
}

impl EmbeddingClient {
    pub fn new(cfg: EndpointConfig, transport: Arc<dyn Transport>) -> Self {
        let gate = Gate::new(cfg.max_in_flight);
        Self { cfg, transport, gate }
    }

    pub fn from_env() -> Result<Self, LlmError> {
        Ok(Self::new(
            EndpointConfig::embed_from_env()?,
            Arc::new(HttpTransport::new()?),
        ))
    }

    pub fn model(&self) -> &str {
        &self.cfg.model
    }

    /// One vector per input string, all of equal length.
    ///
    /// Accepts `{"data": [{"embedding": [...]}, ...]}` or
    /// `{"embeddings": [[...], ...]}`.
    pub fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, LlmError> {
        let body = json!({ "model": self.cfg.model, "input": inputs });
        let url = self.cfg.url("embeddings");
        let reply = call_with_retries(&self.cfg, self.transport.as_ref(), &self.gate, &url, &body)?;
        let rows: Vec<&Value> = if let Some(data) = reply.get("data").and_then(Value::as_array) {
            data.iter().filter_map(|d| d.get("embedding")).collect()
        } else if let Some(e) = reply.get("embeddings").and_then(Value::as_array) {
            e.iter().collect()
        } else {
            return Err(LlmError::Malformed("no `data` or `embeddings` field".into()));
        };
        let vecs = rows
            .into_iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| LlmError::Malformed("embedding is not an array".into()))?
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| LlmError::Malformed("non-numeric component".into()))
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        if vecs.len() != inputs.len() {
            return Err(LlmError::Malformed(format!(
                "{} vectors for {} inputs",
                vecs.len(),
                inputs.len()
            )));
        }
        if vecs.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(LlmError::Malformed("vectors differ in length".into()));
        }
        Ok(vecs)
    }
}

/// A prompt with named `{placeholder}`s and the JSON fields its reply must carry.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub version: u32,
    pub text: String,
    pub fields: Vec<&'static str>,
}

impl PromptTemplate {
    pub fn new(name: &'static str, version: u32, source: &str, fields: Vec<&'static str>) -> Self {
        let text = source
            .lines()
            .skip_while(|l| l.starts_with("# "))
            .collect::<Vec<_>>()
            .join("\n");
        Self {
            name,
            version,
            text,
            fields,
        }
    }

    pub fn placeholders(&self) -> Vec<String> {
        let mut out = Vec::new();
        let bytes = self.text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'{' {
                let rest = &self.text[i + 1..];
                if let Some(end) = rest.find('}') {
                    let name = &rest[..end];
                    if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
                        if !out.iter().any(|n| n == name) {
                            out.push(name.to_string());
                        }
                        i += end + 2;
                        continue;
                    }
                }
            }
            i += 1;
        }
        out
    }

    /// Substitutes every placeholder; an unbound placeholder is an error.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, LlmError> {
        let mut out = self.text.clone();
        for name in self.placeholders() {
            let value = bindings
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| LlmError::Template(format!("{}: unbound placeholder {{{name}}}", self.name)))?;
            out = out.replace(&format!("{{{name}}}", name = name), value);
        }
        Ok(out)
    }
}

pub mod prompts {
    use super::PromptTemplate;

    pub fn propose_actions() -> PromptTemplate {
        PromptTemplate::new(
            "propose_actions",
            1,
            include_str!("../prompts/propose_actions.v1.txt"),
            vec!["actions"],
        )
    }

    pub fn realize_utterance() -> PromptTemplate {
        PromptTemplate::new(
            "realize_utterance",
            1,
            include_str!("../prompts/realize_utterance.v1.txt"),
            vec!["utterance"],
        )
    }

    pub fn refined_commit() -> PromptTemplate {
        PromptTemplate::new(
            "refined_commit",
            1,
            include_str!("../prompts/refined_commit.v1.txt"),
            vec!["candidate_id"],
        )
    }

    pub fn simulate_user() -> PromptTemplate {
        PromptTemplate::new(
            "simulate_user",
            1,
            include_str!("../prompts/simulate_user.v1.txt"),
            vec!["answer"],
        )
    }
}

/// Extracts the template's fields from the first fenced block of `reply`.
/// Prose around the block is ignored; the block itself must be a JSON object
/// with every expected field.
pub fn parse_structured(reply: &str, template: &PromptTemplate) -> Result<Map<String, Value>, LlmError> {
    let block = fenced_block(reply).ok_or_else(|| LlmError::Parse("no fenced block".into()))?;
    let value: Value = serde_json::from_str(block).map_err(|e| LlmError::Parse(format!("invalid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(LlmError::Parse("block is not a JSON object".into()));
    };
    if let Some(missing) = template.fields.iter().find(|f| !map.contains_key(**f)) {
        return Err(LlmError::Parse(format!("missing field `{missing}`")));
    }
    Ok(map)
}

fn fenced_block(reply: &str) -> Option<&str> {
    let start = reply.find("```")?;
    let after = &reply[start + 3..];
    // skip an optional info string such as `json`
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim())
}

/// Replies with a fixed script, one entry per call, repeating the last.
pub struct ScriptedModel {
    replies: Mutex<Vec<Result<String, LlmError>>>,
    pub calls: Mutex<Vec<ChatExchange>>,
}

impl ScriptedModel {
    pub fn new(replies: Vec<Result<String, LlmError>>) -> Self {
        let mut replies = replies;
        replies.reverse();
        Self {
            replies: Mutex::new(replies),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn always(reply: impl Into<String>) -> Self {
        Self::new(vec![Ok(reply.into())])
    }

    pub fn failing(err: LlmError) -> Self {
        Self::new(vec![Err(err)])
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl ChatModel for ScriptedModel {
    fn model_name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, x: &ChatExchange) -> Result<String, LlmError> {
        self.calls.lock().unwrap().push(x.clone());
        let mut r = self.replies.lock().unwrap();
        if r.len() > 1 {
            r.pop().unwrap()
        } else {
            r.last()
                .cloned()
                .unwrap_or(Err(LlmError::NotConfigured("empty script")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
    }

    impl Transport for Flaky {
        fn post_json(
            &self,
            _url: &str,
            _body: &Value,
            _token: Option<&str>,
            _timeout: Duration,
        ) -> Result<Value, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(TransportError::Connect("injected".into()))
            } else {
                Ok(json!({"choices": [{"message": {"content": "ok"}}]}))
            }
        }
    }

    fn fast_cfg() -> EndpointConfig {
        let mut cfg = EndpointConfig::new("http://unused", "m");
        cfg.backoff = Duration::from_millis(1);
        cfg
    }

    #[test]
    fn retries_two_transient_failures() {
        let t = Arc::new(Flaky {
            failures: 2,
            calls: AtomicUsize::new(0),
        });
        let client = LlmClient::new(fast_cfg(), t.clone());
        let out = client.complete(&client.exchange("hi")).unwrap();
        assert_eq!(out, "ok");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_third_failure() {
        let t = Arc::new(Flaky {
            failures: 3,
            calls: AtomicUsize::new(0),
        });
        let client = LlmClient::new(fast_cfg(), t.clone());
        assert!(matches!(
            client.complete(&client.exchange("hi")),
            Err(LlmError::Transport(_))
        ));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    struct Slow;
    impl Transport for Slow {
        fn post_json(&self, _: &str, _: &Value, _: Option<&str>, timeout: Duration) -> Result<Value, TransportError> {
            std::thread::sleep(timeout);
            Err(TransportError::Timeout)
        }
    }

    #[test]
    fn deadline_exceeded_is_a_timeout() {
        let mut cfg = fast_cfg();
        cfg.deadline = Duration::from_millis(30);
        let client = LlmClient::new(cfg, Arc::new(Slow));
        let start = Instant::now();
        assert_eq!(client.complete(&client.exchange("hi")), Err(LlmError::Timeout));
        assert!(start.elapsed() < Duration::from_secs(1));
    }

    struct Status(u16);
    impl Transport for Status {
        fn post_json(&self, _: &str, _: &Value, _: Option<&str>, _: Duration) -> Result<Value, TransportError> {
            Err(TransportError::Status(self.0, "nope".into()))
        }
    }

    #[test]
    fn auth_failures_are_not_retried() {
        let client = LlmClient::new(fast_cfg(), Arc::new(Status(401)));
        assert_eq!(client.complete(&client.exchange("x")), Err(LlmError::Auth(401)));
    }

    #[test]
    fn template_render_requires_all_bindings() {
        let t = prompts::refined_commit();
        assert_eq!(t.placeholders(), vec!["history", "candidates", "belief_topk"]);
        assert!(matches!(t.render(&[("history", "h")]), Err(LlmError::Template(_))));
        let out = t
            .render(&[("history", "H"), ("candidates", "C"), ("belief_topk", "B")])
            .unwrap();
        assert!(out.contains("H") && out.contains("\"candidate_id\""));
        assert!(!out.contains("{history}"));
        assert!(!out.starts_with("# "));
    }

    #[test]
    fn parse_well_formed_block() {
        let t = prompts::refined_commit();
        let m = parse_structured("```json\n{\"candidate_id\": \"c3\"}\n```", &t).unwrap();
        assert_eq!(m["candidate_id"], "c3");
    }

    #[test]
    fn parse_tolerates_prose_around_block() {
        let t = prompts::propose_actions();
        let reply = "Sure! Here you go:\n```json\n{\"actions\": []}\n```\nHope that helps.";
        assert!(parse_structured(reply, &t).unwrap()["actions"].is_array());
        let bare = "Thinking...\n```\n{\"actions\": [{\"attribute\":\"a\",\"options\":[\"x\",\"y\"]}]}\n```";
        assert!(parse_structured(bare, &t).is_ok());
    }

    #[test]
    fn parse_is_strict_inside_block() {
        let t = prompts::refined_commit();
        assert!(matches!(
            parse_structured("```json\n{\"other\": 1}\n```", &t),
            Err(LlmError::Parse(_))
        ));
        assert!(parse_structured("```json\n{candidate_id: c3}\n```", &t).is_err());
        assert!(parse_structured("{\"candidate_id\": \"c3\"}", &t).is_err());
        assert!(parse_structured("```json\n[1,2]\n```", &t).is_err());
    }

    #[test]
    fn gate_bounds_concurrency() {
        struct Counting {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        impl Transport for Counting {
            fn post_json(&self, _: &str, _: &Value, _: Option<&str>, _: Duration) -> Result<Value, TransportError> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(10));
                self.now.fetch_sub(1, Ordering::SeqCst);
                Ok(json!({"choices": [{"message": {"content": "ok"}}]}))
            }
        }
        let t = Arc::new(Counting {
            now: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let mut cfg = fast_cfg();
        cfg.max_in_flight = 2;
        let client = Arc::new(LlmClient::new(cfg, t.clone()));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let c = Arc::clone(&client);
                std::thread::spawn(move || c.complete(&c.exchange("x")).unwrap())
            })
            .collect();
        handles.into_iter().for_each(|h| {
            h.join().unwrap();
        });
        assert!(t.peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn scripted_model_plays_in_order() {
        let m = ScriptedModel::new(vec![Err(LlmError::Timeout), Ok("b".into())]);
        let x = ChatExchange::user("m", "q");
        assert_eq!(m.complete(&x), Err(LlmError::Timeout));
        assert_eq!(m.complete(&x).unwrap(), "b");
        assert_eq!(m.complete(&x).unwrap(), "b");
        assert_eq!(m.call_count(), 3);
    }
}
