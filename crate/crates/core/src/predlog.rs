//! Timestamped prediction responses and the append-only prediction log.
//!
//! The log holds one JSON object per line: the response fields plus
//! `input_hash`, the lowercase hex SHA-256 of the composed model input, and
//! optionally `input`, the composed input itself (prompt and essay).

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::scores::LabelSet;
use crate::{Error, Result, ScoreVector};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResponse {
    pub request_id: String,
    pub scores: ScoreVector,
    pub per_backend: Vec<(String, ScoreVector)>,
    /// ISO-8601 UTC with millisecond precision, e.g. `2024-05-01T12:00:00.123Z`.
    pub timestamp: String,
    pub latency_ms: u64,
    pub model_version: String,
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn timestamp_now() -> String {
    format_timestamp(Utc::now())
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Validation(format!("invalid timestamp {s:?}: {e}")))
}

/// Lowercase hex SHA-256.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn input_hash(input: &str) -> String {
    digest_hex(input.as_bytes())
}

impl PredictionResponse {
    pub fn to_json(&self, labels: &LabelSet) -> Value {
        let per_backend: Map<String, Value> = self
            .per_backend
            .iter()
            .map(|(id, s)| (id.clone(), labels.to_json(s)))
            .collect();
        json!({
            "request_id": self.request_id,
            "scores": labels.to_json(&self.scores),
            "per_backend": per_backend,
            "timestamp": self.timestamp,
            "latency_ms": self.latency_ms,
            "model_version": self.model_version,
        })
    }

    pub fn from_json(value: &Value, labels: &LabelSet) -> Result<Self> {
        let bad = |m: String| Error::Validation(format!("prediction response: {m}"));
        let str_field = |k: &str| -> Result<String> {
            value
                .get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| bad(format!("missing string field `{k}`")))
        };
        let scores = labels
            .from_json(value.get("scores").unwrap_or(&Value::Null))
            .map_err(bad)?;
        let per_backend = value
            .get("per_backend")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing object field `per_backend`".into()))?
            .iter()
            .map(|(id, v)| labels.from_json(v).map(|s| (id.clone(), s)).map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        let timestamp = str_field("timestamp")?;
        parse_timestamp(&timestamp)?;
        Ok(PredictionResponse {
            request_id: str_field("request_id")?,
            scores,
            per_backend,
            timestamp,
            latency_ms: value
                .get("latency_ms")
                .and_then(Value::as_u64)
                .ok_or_else(|| bad("missing integer field `latency_ms`".into()))?,
            model_version: str_field("model_version")?,
        })
    }
}

/// One prediction as it is written to the log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub response: PredictionResponse,
    pub input_hash: String,
    /// The composed input, when inputs are being kept.
    pub input: Option<String>,
}

impl LogRecord {
    pub fn new(response: PredictionResponse, input: &str, keep_input: bool) -> Self {
        LogRecord {
            response,
            input_hash: input_hash(input),
            input: keep_input.then(|| input.to_string()),
        }
    }
}

/// One log line (without the trailing newline).
pub fn log_line(record: &LogRecord, labels: &LabelSet) -> String {
    let mut v = record.response.to_json(labels);
    let obj = v.as_object_mut().expect("response serializes to an object");
    obj.insert("input_hash".into(), Value::String(record.input_hash.clone()));
    if let Some(input) = &record.input {
        obj.insert("input".into(), Value::String(input.clone()));
    }
    v.to_string()
}

/// Inverse of [`log_line`].
pub fn parse_log_line(line: &str, labels: &LabelSet) -> Result<LogRecord> {
    let v: Value = serde_json::from_str(line).map_err(|e| Error::Validation(format!("log line is not JSON: {e}")))?;
    let input_hash = v
        .get("input_hash")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Validation("log line has no `input_hash`".into()))?
        .to_string();
    let input = match v.get("input") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::Validation("log field `input` is not a string".into())),
    };
    Ok(LogRecord {
        response: PredictionResponse::from_json(&v, labels)?,
        input_hash,
        input,
    })
}

/// Appends one record to the log at `path`, creating the file if needed.
pub fn append_prediction_log(record: &LogRecord, labels: &LabelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io_at(path, e))?;
    writeln!(f, "{}", log_line(record, labels))?;
    Ok(())
}

/// Log handle that serializes appends from many threads through one file handle.
pub struct PredictionLog {
    path: PathBuf,
    labels: LabelSet,
    file: Mutex<File>,
}

impl PredictionLog {
    pub fn open(path: impl Into<PathBuf>, labels: LabelSet) -> Result<Self> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io_at(&path, e))?;
        Ok(PredictionLog {
            path,
            labels,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &LogRecord) -> Result<()> {
        let mut line = log_line(record, &self.labels);
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())?;
        Ok(())
    }
}
