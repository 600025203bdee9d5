//! Prediction backends: one backend is one ensemble member.
//!
//! Remote backends speak a small JSON protocol over HTTP:
//!
//! ```text
//! POST <base_url>/score
//! {"text": "<composed input>"}
//! -> 200 {"scores": {"<label>": <float>, ... nine labels ...}}
//! ```

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scores::LabelSet;
use crate::{Baseline, Error, Result, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Baseline,
    Remote,
}

#[async_trait]
pub trait PredictionBackend: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> BackendKind;
    /// Raw, unclamped scores for a composed model input.
    async fn predict(&self, input: &str) -> Result<ScoreVector>;
}

pub struct BaselineBackend {
    id: String,
    model: Arc<Baseline>,
}

impl BaselineBackend {
    pub fn new(id: impl Into<String>, model: Arc<Baseline>) -> Self {
        BaselineBackend { id: id.into(), model }
    }

    pub fn model(&self) -> &Baseline {
        &self.model
    }
}

#[async_trait]
impl PredictionBackend for BaselineBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Baseline
    }

    async fn predict(&self, input: &str) -> Result<ScoreVector> {
        Ok(self.model.predict_text(input))
    }
}

pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    text: &'a str,
}

pub struct RemoteBackend {
    id: String,
    endpoint: String,
    labels: LabelSet,
    client: reqwest::Client,
}

impl RemoteBackend {
    /// `base_url` is the server root; requests go to `<base_url>/score`.
    pub fn new(id: impl Into<String>, base_url: &str, labels: LabelSet, timeout: Duration) -> Result<Self> {
        let id = id.into();
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Backend {
                id: id.clone(),
                message: format!("cannot build HTTP client: {e}"),
            })?;
        Ok(RemoteBackend {
            endpoint: format!("{}/score", base_url.trim_end_matches('/')),
            id,
            labels,
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn backend_error(&self, message: String) -> Error {
        Error::Backend {
            id: self.id.clone(),
            message,
        }
    }

    fn protocol_error(&self, message: String) -> Error {
        Error::Protocol {
            id: self.id.clone(),
            message,
        }
    }

    /// Extracts the score vector from a reply body.
    pub fn parse_reply(&self, body: &[u8]) -> Result<ScoreVector> {
        let value: Value =
            serde_json::from_slice(body).map_err(|e| self.protocol_error(format!("reply is not JSON: {e}")))?;
        let scores = value
            .get("scores")
            .ok_or_else(|| self.protocol_error("reply has no `scores` field".into()))?;
        self.labels.from_json(scores).map_err(|m| self.protocol_error(m))
    }
}

#[async_trait]
impl PredictionBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    async fn predict(&self, input: &str) -> Result<ScoreVector> {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&ScoreRequest { text: input })
            .send()
            .await
            .map_err(|e| {
                let what = if e.is_timeout() { "timed out" } else { "unreachable" };
                self.backend_error(format!("{what}: {e}"))
            })?;
        let status = resp.status();
        let body = resp
            .bytes()
            .await
            .map_err(|e| self.backend_error(format!("reading reply: {e}")))?;
        if !status.is_success() {
            return Err(self.backend_error(format!("HTTP {status}")));
        }
        self.parse_reply(&body)
    }
}

/// Backends addressable by id, in registration order.
#[derive(Default, Clone)]
pub struct BackendRegistry {
    backends: Vec<Arc<dyn PredictionBackend>>,
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, backend: Arc<dyn PredictionBackend>) -> Result<()> {
        if self.get(backend.id()).is_some() {
            return Err(Error::Config(format!("backend id `{}` registered twice", backend.id())));
        }
        self.backends.push(backend);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn PredictionBackend>> {
        self.backends.iter().find(|b| b.id() == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.backends.iter().map(|b| b.id().to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.backends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backends.is_empty()
    }
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ids()).finish()
    }
}
