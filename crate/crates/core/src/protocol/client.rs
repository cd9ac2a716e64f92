use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DecodingParams, ModelIdentity, Prompt};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("no stored response for prompt {hash} (replicate {replicate})")]
    ReplayMiss { hash: String, replicate: usize },
    #[error("transport failed: {0}")]
    Transport(String),
    #[error("replay store error: {0}")]
    Store(String),
}

/// Everything a model sees for one replicate.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a Prompt,
    pub model: &'a ModelIdentity,
    pub decoding: &'a DecodingParams,
    pub replicate: usize,
}

/// A source of raw model text, live or recorded.
pub trait ModelClient: Send + Sync {
    fn identity(&self) -> &ModelIdentity;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError>;
}

/// Stored responses for one prompt, indexed by replicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub prompt_hash: String,
    pub model: String,
    pub responses: Vec<String>,
}

/// Directory of `<prompt_hash>.json` files.
#[derive(Debug)]
pub struct ReplayStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ReplayStore { dir, write_lock: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Result<Option<ReplayEntry>, ClientError> {
        let path = self.path(hash);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| ClientError::Store(e.to_string()))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| ClientError::Store(format!("{}: {e}", path.display())))
    }

    pub fn put(&self, entry: &ReplayEntry) -> Result<(), ClientError> {
        let text = serde_json::to_string_pretty(entry).expect("entry serializes");
        fs::write(self.path(&entry.prompt_hash), text + "\n").map_err(|e| ClientError::Store(e.to_string()))
    }

    /// Stores `text` as replicate `replicate` of `hash`, keeping other
    /// replicates already on disk.
    pub fn record(&self, hash: &str, model: &ModelIdentity, replicate: usize, text: &str) -> Result<(), ClientError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut entry = self.get(hash)?.unwrap_or_else(|| ReplayEntry {
            prompt_hash: hash.to_string(),
            model: model.to_string(),
            responses: Vec::new(),
        });
        if entry.responses.len() <= replicate {
            entry.responses.resize(replicate + 1, String::new());
        }
        entry.responses[replicate] = text.to_string();
        self.put(&entry)
    }

    pub fn lookup(&self, hash: &str, replicate: usize) -> Result<String, ClientError> {
        self.get(hash)?
            .and_then(|e| e.responses.get(replicate).cloned())
            .ok_or_else(|| ClientError::ReplayMiss { hash: hash.to_string(), replicate })
    }
}

/// Serves recorded responses by prompt hash.
#[derive(Debug)]
pub struct ReplayClient {
    identity: ModelIdentity,
    store: ReplayStore,
}

impl ReplayClient {
    pub fn new(identity: ModelIdentity, store: ReplayStore) -> Self {
        ReplayClient { identity, store }
    }
}

impl ModelClient for ReplayClient {
    fn identity(&self) -> &ModelIdentity {
        &self.identity
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        self.store.lookup(&request.prompt.hash, request.replicate)
    }
}

/// The vendor-neutral request/response contract behind [`LiveClient`].
pub trait Transport: Send + Sync {
    fn send(&self, request: &CompletionRequest<'_>) -> Result<String, String>;
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

/// Calls a [`Transport`] with bounded retries and records every answer in a
/// replay store, so live runs can be replayed later.
pub struct LiveClient<T: Transport> {
    identity: ModelIdentity,
    transport: T,
    store: Option<ReplayStore>,
    max_attempts: usize,
    base_backoff: Duration,
    sleep: Sleeper,
}

impl<T: Transport> LiveClient<T> {
    pub fn new(identity: ModelIdentity, transport: T) -> Self {
        LiveClient {
            identity,
            transport,
            store: None,
            max_attempts: 3,
            base_backoff: Duration::from_millis(500),
            sleep: Box::new(std::thread::sleep),
        }
    }

    pub fn recording_to(mut self, store: ReplayStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_backoff(mut self, base: Duration, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.base_backoff = base;
        self.sleep = Box::new(sleep);
        self
    }

    pub fn max_attempts(&self) -> usize {
        self.max_attempts
    }
}

impl<T: Transport> ModelClient for LiveClient<T> {
    fn identity(&self) -> &ModelIdentity {
        &self.identity
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        let mut last_error = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                (self.sleep)(self.base_backoff * 2u32.pow(attempt as u32 - 1));
            }
            match self.transport.send(request) {
                Ok(text) => {
                    if let Some(store) = &self.store {
                        store.record(&request.prompt.hash, &self.identity, request.replicate, &text)?;
                    }
                    return Ok(text);
                }
                Err(e) => {
                    log::warn!("attempt {} for prompt {} failed: {e}", attempt + 1, request.prompt.hash);
                    last_error = e;
                }
            }
        }
        Err(ClientError::Transport(last_error))
    }
}

/// Runs an external program per request: a JSON request on stdin, the raw
/// model text on stdout. Vendor adapters live outside this crate.
#[derive(Debug, Clone)]
pub struct CommandTransport {
    pub program: String,
    pub args: Vec<String>,
}

#[derive(Serialize)]
struct CommandRequest<'a> {
    vendor: &'a str,
    model_id: &'a str,
    prompt: &'a str,
    prompt_hash: &'a str,
    replicate: usize,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    seed: Option<u64>,
}

impl Transport for CommandTransport {
    fn send(&self, request: &CompletionRequest<'_>) -> Result<String, String> {
        let body = serde_json::to_vec(&CommandRequest {
            vendor: &request.model.vendor,
            model_id: &request.model.model_id,
            prompt: &request.prompt.text,
            prompt_hash: &request.prompt.hash,
            replicate: request.replicate,
            temperature: request.decoding.temperature,
            top_p: request.decoding.top_p,
            max_tokens: request.decoding.max_tokens,
            seed: request.decoding.seed,
        })
        .expect("request serializes");
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start {}: {e}", self.program))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&body)
            .map_err(|e| e.to_string())?;
        let out = child.wait_with_output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::sha256_hex;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn prompt() -> Prompt {
        Prompt { text: "hello".into(), hash: sha256_hex(b"hello") }
    }

    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
    }

    impl Transport for Flaky {
        fn send(&self, _: &CompletionRequest<'_>) -> Result<String, String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(format!("boom {n}"))
            } else {
                Ok("PREDICTION: 1\nCONFIDENCE: Neutral".into())
            }
        }
    }

    fn request<'a>(p: &'a Prompt, id: &'a ModelIdentity, d: &'a DecodingParams) -> CompletionRequest<'a> {
        CompletionRequest { prompt: p, model: id, decoding: d, replicate: 2 }
    }

    #[test]
    fn retries_then_records() {
        let dir = tempfile::tempdir().unwrap();
        let id = ModelIdentity::registry("claude").unwrap();
        let slept = std::sync::Arc::new(Mutex::new(Vec::new()));
        let s = slept.clone();
        let client = LiveClient::new(id.clone(), Flaky { failures: 2, calls: AtomicUsize::new(0) })
            .recording_to(ReplayStore::open(dir.path()).unwrap())
            .with_backoff(Duration::from_millis(10), move |d| s.lock().unwrap().push(d));
        let (p, d) = (prompt(), DecodingParams::default());
        let text = client.complete(&request(&p, &id, &d)).unwrap();
        assert!(text.starts_with("PREDICTION"));
        assert_eq!(*slept.lock().unwrap(), vec![Duration::from_millis(10), Duration::from_millis(20)]);

        let replay = ReplayClient::new(id.clone(), ReplayStore::open(dir.path()).unwrap());
        assert_eq!(replay.complete(&request(&p, &id, &d)).unwrap(), text);
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let id = ModelIdentity::registry("claude").unwrap();
        let client = LiveClient::new(id.clone(), Flaky { failures: 3, calls: AtomicUsize::new(0) })
            .with_backoff(Duration::ZERO, |_| {});
        let (p, d) = (prompt(), DecodingParams::default());
        match client.complete(&request(&p, &id, &d)) {
            Err(ClientError::Transport(e)) => assert_eq!(e, "boom 2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn replay_miss_names_hash() {
        let dir = tempfile::tempdir().unwrap();
        let id = ModelIdentity::registry("gemini").unwrap();
        let replay = ReplayClient::new(id.clone(), ReplayStore::open(dir.path()).unwrap());
        let (p, d) = (prompt(), DecodingParams::default());
        let err = replay.complete(&request(&p, &id, &d)).unwrap_err();
        assert!(err.to_string().contains(&p.hash));
    }

    #[cfg(unix)]
    #[test]
    fn command_transport_round_trip() {
        let t = CommandTransport {
            program: "sh".into(),
            args: vec!["-c".into(), "cat >/dev/null; printf 'PREDICTION: 0'".into()],
        };
        let id = ModelIdentity::registry("claude").unwrap();
        let (p, d) = (prompt(), DecodingParams::default());
        assert_eq!(t.send(&request(&p, &id, &d)).unwrap(), "PREDICTION: 0");
        let failing = CommandTransport { program: "sh".into(), args: vec!["-c".into(), "exit 3".into()] };
        assert!(failing.send(&request(&p, &id, &d)).is_err());
    }
}
