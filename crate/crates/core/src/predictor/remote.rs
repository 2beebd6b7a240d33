//! HTTP client for an external model speaking the `/predict` + `/info`
//! JSON protocol.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Prediction, Predictor};
use crate::error::{Error, Result};
use crate::text::Document;

/// Environment variable holding an extra request header, `Name: value`,
/// forwarded with every remote call (typically `Authorization: Bearer ...`).
pub const AUTH_HEADER_ENV: &str = "FRED_AUTH_HEADER";

const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8000`.
    pub endpoint: String,
    /// Maximum texts per request; `None` sends the whole batch at once.
    pub batch_size: Option<usize>,
    /// Maximum requests in flight.
    pub concurrency: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
    /// Extra header as `(name, value)`.
    pub auth_header: Option<(String, String)>,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            batch_size: None,
            concurrency: 4,
            max_retries: 2,
            initial_backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(300),
            auth_header: None,
        }
    }

    /// Reads [`AUTH_HEADER_ENV`] if set.
    pub fn with_auth_from_env(mut self) -> Result<Self> {
        if let Ok(raw) = std::env::var(AUTH_HEADER_ENV) {
            let (name, value) = raw
                .split_once(':')
                .ok_or_else(|| Error::config(format!("{AUTH_HEADER_ENV} must look like 'Name: value'")))?;
            self.auth_header = Some((name.trim().to_string(), value.trim().to_string()));
        }
        Ok(self)
    }
}

#[derive(Debug, Serialize)]
struct PredictRequest<'a> {
    texts: &'a [String],
}

#[derive(Debug, Deserialize)]
struct PredictResponse {
    probabilities: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct InfoResponse {
    classes: Vec<String>,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

pub struct RemoteModel {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    classes: OnceLock<Option<Vec<String>>>,
}

impl RemoteModel {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        if cfg.endpoint.is_empty() {
            return Err(Error::config("remote endpoint URL is empty"));
        }
        if cfg.concurrency == 0 || cfg.batch_size == Some(0) {
            return Err(Error::config("remote concurrency and batch size must be positive"));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteModel {
            cfg,
            agent,
            classes: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    /// `GET /info`.
    pub fn info(&self) -> Result<Vec<String>> {
        let url = format!("{}/info", self.cfg.endpoint);
        let mut req = self.agent.get(&url);
        if let Some((k, v)) = &self.cfg.auth_header {
            req = req.header(k, v);
        }
        let transport = |message: String| Error::Transport { batch: 0..0, message };
        let mut resp = req.call().map_err(|e| transport(format!("GET {url}: {e}")))?;
        if resp.status() != 200 {
            return Err(transport(format!("GET {url}: HTTP {}", resp.status())));
        }
        let info: InfoResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| transport(format!("GET {url}: malformed response: {e}")))?;
        Ok(info.classes)
    }

    /// `POST /predict` for raw texts, returning the probability rows.
    pub fn predict_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let chunk = self.cfg.batch_size.unwrap_or(texts.len());
        let ranges: Vec<Range<usize>> = (0..texts.len())
            .step_by(chunk)
            .map(|s| s..(s + chunk).min(texts.len()))
            .collect();
        let results: Mutex<Vec<Option<ChunkResult>>> = Mutex::new((0..ranges.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.cfg.concurrency.min(ranges.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(range) = ranges.get(k) else { break };
                    let out = self.send_with_retry(range.clone(), &texts[range.clone()]);
                    results.lock().unwrap()[k] = Some(out);
                });
            }
        });
        let mut rows = Vec::with_capacity(texts.len());
        for r in results.into_inner().unwrap() {
            rows.extend(r.expect("every chunk is processed")?);
        }
        Ok(rows)
    }

    fn send_with_retry(&self, batch: Range<usize>, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut attempt = 0u32;
        loop {
            match self.send_once(texts) {
                Ok(rows) => return Ok(rows),
                Err(Attempt::Retry(msg)) if attempt < self.cfg.max_retries => {
                    let wait = self.cfg.initial_backoff * 2u32.pow(attempt);
                    log::warn!(
                        "predict request for inputs {}..{} failed ({msg}); retrying in {wait:?}",
                        batch.start,
                        batch.end
                    );
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(Attempt::Retry(message)) | Err(Attempt::Fatal(message)) => {
                    return Err(Error::Transport { batch, message })
                }
            }
        }
    }

    fn send_once(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, Attempt> {
        let url = format!("{}/predict", self.cfg.endpoint);
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some((k, v)) = &self.cfg.auth_header {
            req = req.header(k, v);
        }
        let body = serde_json::to_vec(&PredictRequest { texts }).map_err(|e| Attempt::Fatal(e.to_string()))?;
        let mut resp = req
            .send(&body[..])
            .map_err(|e| Attempt::Retry(format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let msg = format!("POST {url}: HTTP {status}");
            return Err(if status >= 500 || status == 429 {
                Attempt::Retry(msg)
            } else {
                Attempt::Fatal(msg)
            });
        }
        let parsed: PredictResponse = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("POST {url}: malformed response: {e}")))?;
        validate_rows(&parsed.probabilities, texts.len())
            .map_err(|e| Attempt::Fatal(format!("POST {url}: malformed response: {e}")))?;
        Ok(parsed.probabilities)
    }
}

type ChunkResult = Result<Vec<Vec<f64>>>;

fn validate_rows(rows: &[Vec<f64>], expected: usize) -> std::result::Result<(), String> {
    if rows.len() != expected {
        return Err(format!("{} rows for {expected} texts", rows.len()));
    }
    let width = rows.first().map(Vec::len).unwrap_or(0);
    for (i, row) in rows.iter().enumerate() {
        if row.is_empty() || row.len() != width {
            return Err(format!("row {i} has {} entries, expected {width}", row.len()));
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(format!("row {i} has entry {v} outside [0, 1]"));
        }
    }
    Ok(())
}

impl Predictor for RemoteModel {
    fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
        let texts: Vec<String> = docs.iter().map(Document::detokenize).collect();
        Ok(self
            .predict_texts(&texts)?
            .into_iter()
            .map(Prediction::Probabilities)
            .collect())
    }

    fn class_names(&self) -> Option<Vec<String>> {
        self.classes.get_or_init(|| self.info().ok()).clone()
    }
}
