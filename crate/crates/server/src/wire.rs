//! JSON messages exchanged with clients.
//!
//! Websocket frames (`/ws`) are single-line JSON text objects tagged by `type`:
//!
//! ```text
//! client -> {"type":"predict","request_id":"r1","essay":"...",
//!            "profile":{"gender":"female","education":4,"race":3,"age":22,"income":100000}}
//! server -> {"type":"result","request_id":"r1","scores":{...9 labels...},
//!            "per_backend":{"m1":{...},...},"timestamp":"2024-05-01T12:00:00.123Z",
//!            "latency_ms":3,"model_version":"ppipe-..."}
//! server -> {"type":"error","request_id":"r1","code":"bad_request","message":"...","backend_ids":[]}
//! ```
//!
//! `POST /predict` takes the predict object (the `type` field is optional)
//! and answers with the result or error object.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ppipe_core::{AuthorProfile, LabelSet, PredictionResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    BackendError,
    TooLarge,
    RateLimited,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadRequest => "bad_request",
            ErrorCode::BackendError => "backend_error",
            ErrorCode::TooLarge => "too_large",
            ErrorCode::RateLimited => "rate_limited",
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::BadRequest => 400,
            ErrorCode::BackendError => 502,
            ErrorCode::TooLarge => 413,
            ErrorCode::RateLimited => 429,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceError {
    pub code: ErrorCode,
    pub request_id: Option<String>,
    pub message: String,
    pub backend_ids: Vec<String>,
}

impl ServiceError {
    pub fn new(code: ErrorCode, request_id: Option<String>, message: impl Into<String>) -> Self {
        ServiceError {
            code,
            request_id,
            message: message.into(),
            backend_ids: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "error",
            "request_id": self.request_id,
            "code": self.code.as_str(),
            "message": self.message,
            "backend_ids": self.backend_ids,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireProfile {
    pub gender: String,
    pub education: i64,
    pub race: i64,
    pub age: i64,
    pub income: i64,
}

impl From<&AuthorProfile> for WireProfile {
    fn from(p: &AuthorProfile) -> Self {
        WireProfile {
            gender: p.gender.clone(),
            education: p.education.into(),
            race: p.race.into(),
            age: p.age.into(),
            income: p.income.try_into().unwrap_or(i64::MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRequest {
    pub request_id: String,
    pub essay: String,
    pub profile: WireProfile,
}

impl PredictionRequest {
    pub fn new(request_id: impl Into<String>, essay: impl Into<String>, profile: &AuthorProfile) -> Self {
        PredictionRequest {
            request_id: request_id.into(),
            essay: essay.into(),
            profile: profile.into(),
        }
    }

    /// The websocket form of this request.
    pub fn to_ws_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("request serializes");
        v.as_object_mut()
            .expect("object")
            .insert("type".into(), Value::String("predict".into()));
        v
    }

    /// Decodes a request object. `expect_type` requires `"type":"predict"`.
    pub fn from_json(value: &Value, expect_type: bool) -> Result<Self, ServiceError> {
        let request_id = value.get("request_id").and_then(Value::as_str).map(str::to_string);
        let bad = |m: String| ServiceError::new(ErrorCode::BadRequest, request_id.clone(), m);
        match value.get("type").and_then(Value::as_str) {
            Some("predict") => {}
            None if !expect_type => {}
            Some(other) => return Err(bad(format!("unknown message type {other:?}"))),
            None => return Err(bad("message has no `type`".into())),
        }
        let mut obj = value.clone();
        if let Some(o) = obj.as_object_mut() {
            o.remove("type");
        }
        serde_json::from_value(obj).map_err(|e| bad(format!("malformed request: {e}")))
    }
}

pub fn result_json(response: &PredictionResponse, labels: &LabelSet) -> Value {
    let mut v = response.to_json(labels);
    v.as_object_mut()
        .expect("object")
        .insert("type".into(), Value::String("result".into()));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_decoding() {
        let p = AuthorProfile::new("female", 4, 3, 22, 100000).unwrap();
        let req = PredictionRequest::new("r1", "text", &p);
        let v = req.to_ws_json();
        assert_eq!(v["type"], "predict");
        assert_eq!(PredictionRequest::from_json(&v, true).unwrap(), req);
        let plain = serde_json::to_value(&req).unwrap();
        assert!(PredictionRequest::from_json(&plain, true).is_err());
        assert_eq!(PredictionRequest::from_json(&plain, false).unwrap(), req);
    }

    #[test]
    fn errors_echo_request_id() {
        let v = json!({"type": "predict", "request_id": "r9", "essay": 5});
        let e = PredictionRequest::from_json(&v, true).unwrap_err();
        assert_eq!(e.code, ErrorCode::BadRequest);
        assert_eq!(e.request_id.as_deref(), Some("r9"));
        assert_eq!(e.to_json()["code"], "bad_request");
        let e = PredictionRequest::from_json(&json!({"type": "ping"}), true).unwrap_err();
        assert!(e.message.contains("ping"));
    }
}
