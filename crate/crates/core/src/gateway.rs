//! Chat-completion client with retries, bounded-parallel batches and a
//! content-addressed record/replay cache.
//!
//! Every request is identified by a SHA-256 key over the system text, user
//! text, model name and temperature. With a cache configured, live providers
//! serve hits from the cache and append misses to it ("record" mode); the
//! `replay` provider never touches the network and fails on a miss.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tracing::{debug, warn};

use crate::error::{Error, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    OpenaiCompatible,
    GeminiCompatible,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << attempt.min(32));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

fn default_max_tokens() -> u32 {
    2048
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub provider: Provider,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    /// Exchange cache; `{run}` is replaced by the repetition number.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl ModelConfig {
    pub fn replay(model_name: &str, cache: impl Into<PathBuf>) -> Self {
        Self {
            provider: Provider::Replay,
            model_name: model_name.to_string(),
            temperature: 0.0,
            max_output_tokens: default_max_tokens(),
            endpoint: None,
            credential_env: None,
            cache: Some(cache.into()),
            retry: RetryPolicy::default(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::Config(m.to_string()));
        if self.model_name.trim().is_empty() {
            return bad("model_name is empty");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be >= 0");
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be positive");
        }
        match self.provider {
            Provider::Replay => {
                if self.cache.is_none() {
                    return bad("replay provider needs a cache path");
                }
                if self.credential_env.is_some() {
                    return bad("replay provider takes no credential");
                }
            }
            _ => {
                if self.credential_env.as_deref().is_none_or(|v| v.trim().is_empty()) {
                    return bad("live providers need credential_env");
                }
            }
        }
        Ok(())
    }

    /// Reads a TOML model config; a relative cache path is resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ModelConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let (Some(cache), Some(dir)) = (&cfg.cache, path.parent()) {
            if cache.is_relative() {
                cfg.cache = Some(dir.join(cache));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The config for repetition `run` (1-based).
    pub fn for_run(&self, run: usize) -> Self {
        let mut cfg = self.clone();
        cfg.cache = self
            .cache
            .as_ref()
            .map(|p| PathBuf::from(p.to_string_lossy().replace("{run}", &run.to_string())));
        cfg
    }

    fn endpoint(&self) -> String {
        let default = match self.provider {
            Provider::OpenaiCompatible => "https://api.openai.com/v1/chat/completions",
            Provider::GeminiCompatible => "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent",
            Provider::Replay => "",
        };
        self.endpoint.as_deref().unwrap_or(default).replace("{model}", &self.model_name)
    }
}

/// Content hash identifying a request.
pub fn request_key(system: &str, user: &str, model_name: &str, temperature: f64) -> String {
    let canonical = json!([system, user, model_name, temperature]).to_string();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
}

/// One cached request/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub request_key: String,
    pub raw_response: String,
    pub latency_ms: u64,
    pub timestamp_ms: u64,
}

/// Append-only JSONL store of exchanges. Reads are concurrent; appends are
/// serialized through one file handle. The first record for a key wins.
pub struct ExchangeCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, String>>,
    writer: Option<Mutex<File>>,
}

impl ExchangeCache {
    pub fn open(path: &Path, writable: bool) -> Result<Self, GatewayError> {
        let cache_err = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        match fs::read_to_string(path) {
            Ok(text) => {
                for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    let ex: Exchange = serde_json::from_str(line)
                        .map_err(|e| GatewayError::Cache(format!("{} line {}: {e}", path.display(), n + 1)))?;
                    entries.entry(ex.request_key).or_insert(ex.raw_response);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && writable => {}
            Err(e) => return Err(cache_err(e)),
        }
        let writer = if writable {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(cache_err)?;
            }
            let file = OpenOptions::new().create(true).append(true).open(path).map_err(cache_err)?;
            Some(Mutex::new(file))
        } else {
            None
        };
        Ok(Self {
            path: path.to_path_buf(),
            entries: RwLock::new(entries),
            writer,
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&self, exchange: &Exchange) -> Result<(), GatewayError> {
        let Some(writer) = &self.writer else {
            return Err(GatewayError::Cache(format!("{} is read-only", self.path.display())));
        };
        let line = serde_json::to_string(exchange).map_err(|e| GatewayError::Cache(e.to_string()))?;
        {
            let mut file = writer.lock().expect("cache writer lock");
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|e| GatewayError::Cache(format!("{}: {e}", self.path.display())))?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .entry(exchange.request_key.clone())
            .or_insert_with(|| exchange.raw_response.clone());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Value,
}

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON POST. Non-2xx statuses are returned, not raised;
/// `Err` means the request never produced a status.
pub trait Transport: Send + Sync {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        let mut req = self.agent.post(&request.url);
        for (k, v) in &request.headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req.send_json(&request.body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

fn build_http_request(cfg: &ModelConfig, credential: &str, system: &str, user: &str) -> HttpRequest {
    match cfg.provider {
        Provider::GeminiCompatible => HttpRequest {
            url: cfg.endpoint(),
            headers: vec![("x-goog-api-key".into(), credential.to_string())],
            body: json!({
                "systemInstruction": {"parts": [{"text": system}]},
                "contents": [{"role": "user", "parts": [{"text": user}]}],
                "generationConfig": {"temperature": cfg.temperature, "maxOutputTokens": cfg.max_output_tokens},
            }),
        },
        _ => HttpRequest {
            url: cfg.endpoint(),
            headers: vec![("Authorization".into(), format!("Bearer {credential}"))],
            body: json!({
                "model": cfg.model_name,
                "messages": [
                    {"role": "system", "content": system},
                    {"role": "user", "content": user},
                ],
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_output_tokens,
            }),
        },
    }
}

fn extract_content(provider: Provider, body: &str) -> Result<String, GatewayError> {
    let value: Value = serde_json::from_str(body).map_err(|e| GatewayError::Response(e.to_string()))?;
    let text = match provider {
        Provider::GeminiCompatible => value["candidates"][0]["content"]["parts"].as_array().map(|parts| {
            parts
                .iter()
                .filter_map(|p| p["text"].as_str())
                .collect::<Vec<_>>()
                .join("")
        }),
        _ => value["choices"][0]["message"]["content"].as_str().map(str::to_string),
    };
    text.ok_or_else(|| GatewayError::Response("no message content in provider response".into()))
}

fn is_retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

pub struct Gateway {
    cfg: ModelConfig,
    transport: Option<Box<dyn Transport>>,
    credential: Option<String>,
    cache: Option<ExchangeCache>,
}

impl Gateway {
    /// Builds a gateway for `cfg`, reading the credential from the
    /// environment for live providers.
    pub fn new(cfg: ModelConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        if cfg.provider == Provider::Replay {
            return Self::assemble(cfg, None, None);
        }
        let var = cfg.credential_env.clone().unwrap_or_default();
        let credential = std::env::var(&var)
            .map_err(|_| GatewayError::Config(format!("environment variable {var} is not set")))?;
        let transport = UreqTransport::new(Duration::from_secs(cfg.timeout_secs));
        Self::assemble(cfg, Some(Box::new(transport)), Some(credential))
    }

    /// Builds a gateway over a caller-supplied transport.
    pub fn with_transport(cfg: ModelConfig, transport: Box<dyn Transport>, credential: &str) -> Result<Self, GatewayError> {
        cfg.validate()?;
        Self::assemble(cfg, Some(transport), Some(credential.to_string()))
    }

    fn assemble(
        cfg: ModelConfig,
        transport: Option<Box<dyn Transport>>,
        credential: Option<String>,
    ) -> Result<Self, GatewayError> {
        let writable = cfg.provider != Provider::Replay;
        let cache = cfg.cache.as_deref().map(|p| ExchangeCache::open(p, writable)).transpose()?;
        Ok(Self {
            cfg,
            transport,
            credential,
            cache,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn key_for(&self, system: &str, user: &str) -> String {
        request_key(system, user, &self.cfg.model_name, self.cfg.temperature)
    }

    pub fn complete(&self, system: &str, user: &str) -> Result<String, GatewayError> {
        let key = self.key_for(system, user);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            debug!(key = %key, "cache hit");
            return Ok(hit);
        }
        let (Some(transport), Some(credential)) = (&self.transport, &self.credential) else {
            return Err(GatewayError::ReplayMiss(key));
        };
        let request = build_http_request(&self.cfg, credential, system, user);
        let started = Instant::now();
        let body = self.send_with_retry(transport.as_ref(), &request)?;
        let text = extract_content(self.cfg.provider, &body)?;
        if let Some(cache) = &self.cache {
            let exchange = Exchange {
                request_key: key,
                raw_response: text.clone(),
                latency_ms: started.elapsed().as_millis() as u64,
                timestamp_ms: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
            };
            cache.append(&exchange)?;
        }
        Ok(text)
    }

    fn send_with_retry(&self, transport: &dyn Transport, request: &HttpRequest) -> Result<String, GatewayError> {
        let policy = &self.cfg.retry;
        let mut attempt = 0u32;
        loop {
            let outcome = transport.post_json(request);
            let attempts = attempt + 1;
            let retry_reason = match &outcome {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp.body.clone()),
                Ok(resp) if is_retryable(resp.status) => format!("HTTP {}", resp.status),
                Ok(resp) => {
                    return Err(GatewayError::Status { status: resp.status, attempts, body: resp.body.clone() });
                }
                Err(e) => e.clone(),
            };
            if attempt >= policy.max_retries {
                return Err(match outcome {
                    Ok(resp) => GatewayError::Status { status: resp.status, attempts, body: resp.body },
                    Err(message) => GatewayError::Transport { attempts, message },
                });
            }
            let delay = policy.delay(attempt);
            warn!(model = %self.cfg.model_name, attempt = attempts, reason = %retry_reason, ?delay, "retrying request");
            thread::sleep(delay);
            attempt += 1;
        }
    }

    /// Runs `requests` with at most `parallelism` in flight. Results keep the
    /// input order and failures stay in their own slot.
    pub fn batch_complete(&self, requests: &[ChatRequest], parallelism: usize) -> Vec<Result<String, GatewayError>> {
        let workers = parallelism.max(1).min(requests.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<String, GatewayError>>>> =
            Mutex::new((0..requests.len()).map(|_| None).collect());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(req) = requests.get(i) else {
                        break;
                    };
                    let result = self.complete(&req.system, &req.user);
                    slots.lock().expect("batch slots")[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .expect("batch slots")
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;
    use std::sync::Arc;

    const SECRET: &str = "sk-test-DUMMY-SECRET-0123456789";

    fn live_cfg(cache: Option<PathBuf>) -> ModelConfig {
        ModelConfig {
            provider: Provider::OpenaiCompatible,
            model_name: "gpt-test".into(),
            temperature: 0.0,
            max_output_tokens: 64,
            endpoint: Some("http://localhost/v1/chat/completions".into()),
            credential_env: Some("JERE_TEST_KEY".into()),
            cache,
            retry: RetryPolicy { max_retries: 3, base_delay_ms: 1, max_delay_ms: 4 },
            timeout_secs: 5,
        }
    }

    fn ok_body(text: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
    }

    /// Answers with the user text echoed back, after `failures` 429s.
    struct Scripted {
        calls: Arc<AtomicU32>,
        failures: u32,
        order: Arc<Mutex<Vec<String>>>,
        in_flight: Arc<AtomicUsize>,
        max_in_flight: Arc<AtomicUsize>,
        fail_user: Option<String>,
    }

    impl Scripted {
        fn new(failures: u32) -> Self {
            Self {
                calls: Arc::default(),
                failures,
                order: Arc::default(),
                in_flight: Arc::default(),
                max_in_flight: Arc::default(),
                fail_user: None,
            }
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.max_in_flight.fetch_max(now, Ordering::SeqCst);
            thread::sleep(Duration::from_millis(2));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            let user = request.body["messages"][1]["content"].as_str().unwrap().to_string();
            self.order.lock().unwrap().push(user.clone());
            if n < self.failures {
                return Ok(HttpResponse { status: 429, body: "slow down".into() });
            }
            if self.fail_user.as_deref() == Some(user.as_str()) {
                return Ok(HttpResponse { status: 400, body: "bad request".into() });
            }
            Ok(HttpResponse { status: 200, body: ok_body(&format!("echo:{user}")) })
        }
    }

    #[test]
    fn key_is_stable_and_sensitive() {
        let a = request_key("sys", "user", "m", 0.0);
        assert_eq!(a, request_key("sys", "user", "m", 0.0));
        assert_ne!(a, request_key("sys", "user2", "m", 0.0));
        assert_ne!(a, request_key("sys", "user", "m", 0.5));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn config_validation() {
        assert!(live_cfg(None).validate().is_ok());
        let mut replay = ModelConfig::replay("m", "x.jsonl");
        assert!(replay.validate().is_ok());
        replay.credential_env = Some("KEY".into());
        assert!(replay.validate().is_err());
        replay.credential_env = None;
        replay.cache = None;
        assert!(replay.validate().is_err());
        let mut neg = live_cfg(None);
        neg.temperature = -1.0;
        assert!(neg.validate().is_err());
        let mut no_key = live_cfg(None);
        no_key.credential_env = None;
        assert!(no_key.validate().is_err());
    }

    #[test]
    fn run_placeholder() {
        let cfg = ModelConfig::replay("m", "caches/run{run}.jsonl");
        assert_eq!(cfg.for_run(2).cache.unwrap(), PathBuf::from("caches/run2.jsonl"));
    }

    #[test]
    fn replay_hit_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let key = request_key("s", "u", "m", 0.0);
        let ex = Exchange { request_key: key, raw_response: "{}".into(), latency_ms: 1, timestamp_ms: 0 };
        fs::write(&path, serde_json::to_string(&ex).unwrap() + "\n").unwrap();
        let gw = Gateway::new(ModelConfig::replay("m", &path)).unwrap();
        assert_eq!(gw.complete("s", "u").unwrap(), "{}");
        match gw.complete("s", "other") {
            Err(GatewayError::ReplayMiss(k)) => assert_eq!(k, request_key("s", "other", "m", 0.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_replay_cache_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Gateway::new(ModelConfig::replay("m", dir.path().join("nope.jsonl"))).is_err());
    }

    #[test]
    fn record_mode_caches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let transport = Scripted::new(0);
        let calls = transport.calls.clone();
        let gw = Gateway::with_transport(live_cfg(Some(path.clone())), Box::new(transport), SECRET).unwrap();
        assert_eq!(gw.complete("s", "u").unwrap(), "echo:u");
        assert_eq!(gw.complete("s", "u").unwrap(), "echo:u");
        assert_eq!(calls.load(Ordering::SeqCst), 1);

        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(!text.contains(SECRET));

        // The recorded file replays without a network.
        let replay = Gateway::new(ModelConfig::replay("gpt-test", &path)).unwrap();
        assert_eq!(replay.complete("s", "u").unwrap(), "echo:u");
    }

    #[test]
    fn retries_then_succeeds() {
        let transport = Scripted::new(3);
        let calls = transport.calls.clone();
        let gw = Gateway::with_transport(live_cfg(None), Box::new(transport), SECRET).unwrap();
        assert_eq!(gw.complete("s", "u").unwrap(), "echo:u");
        assert_eq!(calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let gw = Gateway::with_transport(live_cfg(None), Box::new(Scripted::new(10)), SECRET).unwrap();
        match gw.complete("s", "u") {
            Err(GatewayError::Status { status: 429, attempts: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let mut transport = Scripted::new(0);
        transport.fail_user = Some("bad".into());
        let calls = transport.calls.clone();
        let gw = Gateway::with_transport(live_cfg(None), Box::new(transport), SECRET).unwrap();
        assert!(matches!(gw.complete("s", "bad"), Err(GatewayError::Status { status: 400, attempts: 1, .. })));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    fn requests(n: usize) -> Vec<ChatRequest> {
        (0..n).map(|i| ChatRequest { system: "s".into(), user: format!("u{i}") }).collect()
    }

    #[test]
    fn batch_keeps_order_and_bounds_parallelism() {
        let transport = Scripted::new(0);
        let max = transport.max_in_flight.clone();
        let gw = Gateway::with_transport(live_cfg(None), Box::new(transport), SECRET).unwrap();
        let out = gw.batch_complete(&requests(10), 3);
        assert_eq!(out.len(), 10);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.as_ref().unwrap(), &format!("echo:u{i}"));
        }
        assert!(max.load(Ordering::SeqCst) <= 3);
    }

    #[test]
    fn batch_isolates_failures() {
        let mut transport = Scripted::new(0);
        transport.fail_user = Some("u4".into());
        let gw = Gateway::with_transport(live_cfg(None), Box::new(transport), SECRET).unwrap();
        let out = gw.batch_complete(&requests(10), 4);
        assert_eq!(out.iter().filter(|r| r.is_ok()).count(), 9);
        assert!(out[4].is_err());
    }

    #[test]
    fn parallelism_one_is_sequential() {
        let transport = Scripted::new(0);
        let order = transport.order.clone();
        let gw = Gateway::with_transport(live_cfg(None), Box::new(transport), SECRET).unwrap();
        gw.batch_complete(&requests(6), 1);
        let expected: Vec<String> = (0..6).map(|i| format!("u{i}")).collect();
        assert_eq!(*order.lock().unwrap(), expected);
    }

    #[test]
    fn gemini_wire_format() {
        let mut cfg = live_cfg(None);
        cfg.provider = Provider::GeminiCompatible;
        cfg.endpoint = None;
        cfg.model_name = "gemini-1.5-flash".into();
        let req = build_http_request(&cfg, SECRET, "sys", "usr");
        assert!(req.url.contains("gemini-1.5-flash:generateContent"));
        assert_eq!(req.body["contents"][0]["parts"][0]["text"], "usr");
        let body = json!({"candidates": [{"content": {"parts": [{"text": "a"}, {"text": "b"}]}}]}).to_string();
        assert_eq!(extract_content(Provider::GeminiCompatible, &body).unwrap(), "ab");
        assert!(extract_content(Provider::OpenaiCompatible, "{}").is_err());
    }
}
