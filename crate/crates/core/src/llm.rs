//! Chat-completion client with a live HTTP backend and a replay backend that
//! serves stored responses keyed by a digest of (model, prompt).

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::directive::strip_code_fences;
use crate::prompt::PromptSpec;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("API returned status {status}: {body}")]
    ApiError { status: u16, body: String },
    #[error("no replay entry for prompt hash {0}")]
    ReplayMiss(String),
    #[error("environment variable {0} with the API key is not set")]
    MissingCredentials(String),
    #[error("i/o error on {path}: {message}")]
    IoFailure { path: String, message: String },
}

impl LlmError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        LlmError::IoFailure {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Live,
    #[default]
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    pub backend: Backend,
    pub replay_dir: PathBuf,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_in_flight: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120,
            retries: 3,
            retry_backoff_ms: 500,
            backend: Backend::Replay,
            replay_dir: PathBuf::from("replay"),
            api_key_env: "OMPGEN_API_KEY".into(),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_hash: String,
    pub model: String,
    pub prompt: String,
    pub response: String,
    pub extracted_code: String,
    pub latency_ms: u64,
    pub timestamp: String,
}

/// On-disk replay entry, one `<hash>.json` file per prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub model: String,
    pub prompt: String,
    pub response: String,
    #[serde(default)]
    pub recorded_at: String,
}

pub fn prompt_hash(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

pub fn extract_code(response: &str) -> String {
    strip_code_fences(response)
}

/// Writes one file per record; existing files for the same hash are replaced.
pub fn record_replay(records: &[GenerationRecord], dir: &Path) -> Result<usize, LlmError> {
    let entries: Vec<ReplayEntry> = records
        .iter()
        .map(|r| ReplayEntry {
            model: r.model.clone(),
            prompt: r.prompt.clone(),
            response: r.response.clone(),
            recorded_at: r.timestamp.clone(),
        })
        .collect();
    write_replay_entries(&entries, dir)
}

pub fn write_replay_entries(entries: &[ReplayEntry], dir: &Path) -> Result<usize, LlmError> {
    std::fs::create_dir_all(dir).map_err(|e| LlmError::io(dir, e))?;
    for e in entries {
        let path = dir.join(format!("{}.json", prompt_hash(&e.model, &e.prompt)));
        let mut body = serde_json::to_string_pretty(e).map_err(|err| LlmError::io(&path, err))?;
        body.push('\n');
        std::fs::write(&path, body).map_err(|err| LlmError::io(&path, err))?;
    }
    Ok(entries.len())
}

pub struct LlmClient {
    cfg: GenerationConfig,
    http: Option<reqwest::blocking::Client>,
    api_key: Option<String>,
    calls: AtomicUsize,
}

impl LlmClient {
    /// Live clients read the API key from the configured environment variable.
    pub fn new(cfg: GenerationConfig) -> Result<Self, LlmError> {
        let (http, api_key) = match cfg.backend {
            Backend::Replay => (None, None),
            Backend::Live => {
                let key = std::env::var(&cfg.api_key_env)
                    .map_err(|_| LlmError::MissingCredentials(cfg.api_key_env.clone()))?;
                let http = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(cfg.timeout_secs))
                    .no_proxy()
                    .build()
                    .map_err(|e| LlmError::Transport(e.to_string()))?;
                (Some(http), Some(key))
            }
        };
        Ok(LlmClient {
            cfg,
            http,
            api_key,
            calls: AtomicUsize::new(0),
        })
    }

    /// Live client with an explicit key, bypassing the environment.
    pub fn with_api_key(cfg: GenerationConfig, api_key: impl Into<String>) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .no_proxy()
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(LlmClient {
            cfg: GenerationConfig {
                backend: Backend::Live,
                ..cfg
            },
            http: Some(http),
            api_key: Some(api_key.into()),
            calls: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.cfg
    }

    /// Number of `generate` calls issued so far, across backends.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn generate(&self, prompt: &PromptSpec) -> Result<GenerationRecord, LlmError> {
        self.generate_text(&prompt.rendered)
    }

    pub fn generate_text(&self, prompt: &str) -> Result<GenerationRecord, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hash = prompt_hash(&self.cfg.model, prompt);
        let (response, latency_ms, timestamp) = match self.cfg.backend {
            Backend::Replay => {
                let entry = self.replay_lookup(&hash)?;
                (entry.response, 0, entry.recorded_at)
            }
            Backend::Live => {
                let start = Instant::now();
                let text = self.live_call(prompt)?;
                (
                    text,
                    start.elapsed().as_millis() as u64,
                    chrono::Utc::now().to_rfc3339(),
                )
            }
        };
        Ok(GenerationRecord {
            extracted_code: extract_code(&response),
            prompt_hash: hash,
            model: self.cfg.model.clone(),
            prompt: prompt.to_string(),
            response,
            latency_ms,
            timestamp,
        })
    }

    fn replay_lookup(&self, hash: &str) -> Result<ReplayEntry, LlmError> {
        let path = self.cfg.replay_dir.join(format!("{hash}.json"));
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(LlmError::ReplayMiss(hash.to_string())),
            Err(e) => return Err(LlmError::io(&path, e)),
        };
        serde_json::from_str(&text).map_err(|e| LlmError::io(&path, e))
    }

    fn live_call(&self, prompt: &str) -> Result<String, LlmError> {
        let (Some(http), Some(key)) = (&self.http, &self.api_key) else {
            return Err(LlmError::MissingCredentials(self.cfg.api_key_env.clone()));
        };
        let body = serde_json::json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        let mut attempt = 0;
        loop {
            let outcome = http.post(&self.cfg.endpoint).bearer_auth(key).json(&body).send();
            let retry_after = match outcome {
                Ok(resp) if resp.status().is_success() => {
                    let v: serde_json::Value = resp.json().map_err(|e| LlmError::Transport(e.to_string()))?;
                    return v["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_string)
                        .ok_or_else(|| LlmError::ApiError {
                            status: 200,
                            body: format!("response without choices[0].message.content: {v}"),
                        });
                }
                Ok(resp) => {
                    let status = resp.status();
                    let retry_after = resp
                        .headers()
                        .get(reqwest::header::RETRY_AFTER)
                        .and_then(|h| h.to_str().ok())
                        .and_then(|s| s.trim().parse::<u64>().ok());
                    let body = resp.text().unwrap_or_default();
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    if !retryable || attempt >= self.cfg.retries {
                        return Err(LlmError::ApiError {
                            status: status.as_u16(),
                            body,
                        });
                    }
                    log::warn!("status {status}, retrying (attempt {})", attempt + 1);
                    retry_after.map(Duration::from_secs)
                }
                Err(e) => {
                    if attempt >= self.cfg.retries {
                        return Err(LlmError::Transport(e.to_string()));
                    }
                    log::warn!("transport error {e}, retrying (attempt {})", attempt + 1);
                    None
                }
            };
            let backoff = Duration::from_millis(self.cfg.retry_backoff_ms.saturating_mul(1 << attempt.min(16)));
            std::thread::sleep(retry_after.unwrap_or(backoff));
            attempt += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn replay_cfg(dir: &Path) -> GenerationConfig {
        GenerationConfig {
            replay_dir: dir.to_path_buf(),
            model: "m".into(),
            ..Default::default()
        }
    }

    #[test]
    fn hash_is_stable_and_model_sensitive() {
        let a = prompt_hash("m", "p");
        assert_eq!(a, prompt_hash("m", "p"));
        assert_ne!(a, prompt_hash("m2", "p"));
        assert_ne!(prompt_hash("ab", "c"), prompt_hash("a", "bc"));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn replay_round_trip_and_idempotence() {
        let dir = tempfile::tempdir().unwrap();
        let entries: Vec<ReplayEntry> = (0..3)
            .map(|i| ReplayEntry {
                model: "m".into(),
                prompt: format!("p{i}"),
                response: format!("```c\n#pragma omp parallel for\nfor(;;){i};\n```"),
                recorded_at: String::new(),
            })
            .collect();
        assert_eq!(write_replay_entries(&entries, dir.path()).unwrap(), 3);
        assert_eq!(write_replay_entries(&entries, dir.path()).unwrap(), 3);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
        assert_eq!(record_replay(&[], dir.path()).unwrap(), 0);

        let client = LlmClient::new(replay_cfg(dir.path())).unwrap();
        let r = client.generate_text("p1").unwrap();
        assert_eq!(r.response, entries[1].response);
        assert_eq!(r.extracted_code, "#pragma omp parallel for\nfor(;;)1;\n");
        let again = client.generate_text("p1").unwrap();
        assert_eq!(r, again);

        // records written back reproduce the same responses
        let other = tempfile::tempdir().unwrap();
        record_replay(std::slice::from_ref(&r), other.path()).unwrap();
        let c2 = LlmClient::new(replay_cfg(other.path())).unwrap();
        assert_eq!(c2.generate_text("p1").unwrap().response, r.response);
        assert_eq!(client.call_count(), 2);
    }

    #[test]
    fn replay_miss_names_hash() {
        let dir = tempfile::tempdir().unwrap();
        let client = LlmClient::new(replay_cfg(dir.path())).unwrap();
        match client.generate_text("absent") {
            Err(LlmError::ReplayMiss(h)) => assert_eq!(h, prompt_hash("m", "absent")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn live_requires_credentials() {
        let cfg = GenerationConfig {
            backend: Backend::Live,
            api_key_env: "OMPGEN_TEST_SURELY_UNSET_KEY".into(),
            ..Default::default()
        };
        assert!(matches!(LlmClient::new(cfg), Err(LlmError::MissingCredentials(_))));
    }

    /// Serves the given (status, body) responses in order, returning the
    /// request bodies it received.
    fn mock_server(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = line.trim().to_string();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(format!("{auth}\n{}", String::from_utf8(buf).unwrap()));
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    fn live_cfg(url: String) -> GenerationConfig {
        GenerationConfig {
            endpoint: url,
            model: "m".into(),
            retries: 2,
            retry_backoff_ms: 1,
            timeout_secs: 10,
            backend: Backend::Live,
            ..Default::default()
        }
    }

    #[test]
    fn live_call_retries_then_succeeds() {
        let ok =
            serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "```\nX\n```"}}]}).to_string();
        let (url, handle) = mock_server(vec![(429, "slow down".into()), (500, "oops".into()), (200, ok)]);
        let client = LlmClient::with_api_key(live_cfg(url), "secret").unwrap();
        let r = client.generate_text("hello").unwrap();
        assert_eq!(r.extracted_code, "X\n");
        let bodies = handle.join().unwrap();
        assert_eq!(bodies.len(), 3);
        assert!(
            bodies[0].starts_with("authorization: Bearer secret")
                || bodies[0].starts_with("Authorization: Bearer secret")
        );
        let sent: serde_json::Value = serde_json::from_str(bodies[2].split_once('\n').unwrap().1).unwrap();
        assert_eq!(sent["model"], "m");
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["messages"][0]["role"], "user");
        assert_eq!(sent["messages"][0]["content"], "hello");
    }

    #[test]
    fn live_call_surfaces_client_errors() {
        let (url, handle) = mock_server(vec![(400, "bad request".into())]);
        let client = LlmClient::with_api_key(live_cfg(url), "k").unwrap();
        match client.generate_text("x") {
            Err(LlmError::ApiError { status, body }) => assert_eq!((status, body.as_str()), (400, "bad request")),
            other => panic!("{other:?}"),
        }
        handle.join().unwrap();
    }

    #[test]
    fn live_transport_failure_after_retries() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let client = LlmClient::with_api_key(live_cfg(url), "k").unwrap();
        assert!(matches!(client.generate_text("x"), Err(LlmError::Transport(_))));
    }
}
