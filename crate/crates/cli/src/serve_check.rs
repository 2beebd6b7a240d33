//! Protocol conformance check of a model server against a recorded fixture.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use fred::predictor::{RemoteConfig, RemoteModel};
use fred::Error;

use crate::args::ServeCheckArgs;
use crate::{emit, read_file, Failure, Outcome};

/// Texts sent in the large-batch check.
const LARGE_BATCH: usize = 3000;
const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureResponse {
    pub probabilities: Vec<Vec<f64>>,
}

/// A recorded `/info` answer and one `/predict` exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub classes: Vec<String>,
    pub request: FixtureRequest,
    pub response: FixtureResponse,
}

impl Fixture {
    fn load(path: &std::path::Path) -> Result<Self, Error> {
        let fixture: Fixture = serde_json::from_str(&read_file(path)?)
            .map_err(|e| Error::config(format!("fixture {}: {e}", path.display())))?;
        if fixture.request.texts.len() != fixture.response.probabilities.len() || fixture.request.texts.is_empty() {
            return Err(Error::config(format!(
                "fixture {} must hold one probability row per text",
                path.display()
            )));
        }
        Ok(fixture)
    }
}

fn rows_mismatch(got: &[Vec<f64>], want: &[Vec<f64>], tol: f64) -> Option<String> {
    if got.len() != want.len() {
        return Some(format!("expected {} rows, got {}", want.len(), got.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g.len() != w.len() {
            return Some(format!("row {i}: expected {} classes, got {}", w.len(), g.len()));
        }
        if let Some(j) = (0..g.len()).find(|&j| (g[j] - w[j]).abs() > tol) {
            return Some(format!("row {i}, class {j}: expected {}, got {}", w[j], g[j]));
        }
    }
    None
}

fn bad_row_sum(rows: &[Vec<f64>]) -> Option<String> {
    rows.iter().enumerate().find_map(|(i, r)| {
        let s: f64 = r.iter().sum();
        ((s - 1.0).abs() > ROW_SUM_TOLERANCE).then(|| format!("row {i} sums to {s}"))
    })
}

struct Check {
    name: &'static str,
    failure: Option<String>,
}

fn malformed_body_status(endpoint: &str, timeout: Duration) -> Result<u16, Error> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let url = format!("{endpoint}/predict");
    let resp = agent
        .post(&url)
        .header("Content-Type", "application/json")
        .send("{\"texts\": [")
        .map_err(|e| Error::Transport {
            batch: 0..0,
            message: format!("POST {url}: {e}"),
        })?;
    Ok(resp.status().as_u16())
}

pub fn run(a: &ServeCheckArgs) -> Outcome {
    let fixture = Fixture::load(&a.fixture)?;
    let cfg = RemoteConfig::new(a.endpoint.as_str()).with_auth_from_env()?;
    let timeout = cfg.timeout;
    let model = RemoteModel::new(cfg)?;
    let texts = &fixture.request.texts;
    let want = &fixture.response.probabilities;
    let mut checks = Vec::new();

    let classes = model.info()?;
    checks.push(Check {
        name: "info",
        failure: (classes != fixture.classes)
            .then(|| format!("expected classes {:?}, got {:?}", fixture.classes, classes)),
    });

    let rows = model.predict_texts(texts)?;
    checks.push(Check {
        name: "predict",
        failure: rows_mismatch(&rows, want, a.tolerance),
    });
    checks.push(Check {
        name: "row-sums",
        failure: bad_row_sum(&rows),
    });

    let reversed: Vec<String> = texts.iter().rev().cloned().collect();
    let want_reversed: Vec<Vec<f64>> = want.iter().rev().cloned().collect();
    checks.push(Check {
        name: "row-order",
        failure: rows_mismatch(&model.predict_texts(&reversed)?, &want_reversed, a.tolerance),
    });

    let large: Vec<String> = texts.iter().cycle().take(LARGE_BATCH).cloned().collect();
    let want_large: Vec<Vec<f64>> = want.iter().cycle().take(LARGE_BATCH).cloned().collect();
    checks.push(Check {
        name: "large-batch",
        failure: rows_mismatch(&model.predict_texts(&large)?, &want_large, a.tolerance),
    });

    let status = malformed_body_status(&model.config().endpoint, timeout)?;
    checks.push(Check {
        name: "malformed-json",
        failure: (status != 400).then(|| format!("expected HTTP 400, got {status}")),
    });

    let mut out = String::new();
    for c in &checks {
        match &c.failure {
            None => out.push_str(&format!("PASS {}\n", c.name)),
            Some(f) => out.push_str(&format!("FAIL {}: {f}\n", c.name)),
        }
    }
    emit(None, &out)?;
    match checks.iter().find(|c| c.failure.is_some()) {
        None => Ok(()),
        Some(c) => Err(Failure::Check(format!(
            "serve-check {} failed: {}",
            c.name,
            c.failure.as_deref().unwrap_or_default()
        ))),
    }
}
