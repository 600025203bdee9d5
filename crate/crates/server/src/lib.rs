//! Real-time prediction service.
//!
//! Endpoints:
//!
//! * `GET /ws`: websocket; one JSON message per text frame (see [`wire`]).
//!   At most `max_in_flight` requests run per connection; extra requests get
//!   a `rate_limited` error.
//! * `POST /predict`: one request object in, one result or error object out.
//! * `GET /health`: `{"status":"ok","model_version":...,"backends":[...]}`.
//!
//! Every result is timestamped (ISO-8601 UTC, milliseconds) when its
//! prediction completes.

pub mod server;
pub mod service;
pub mod wire;

pub use server::{router, shutdown_signal, ServeError, Server};
pub use service::{LogSink, ServiceState};
pub use wire::{ErrorCode, PredictionRequest, ServiceError, WireProfile};

/// `ppipe-` plus the first 16 hex digits of a SHA-256 over the given parts.
pub fn model_version<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut all = Vec::new();
    for p in parts {
        all.extend_from_slice(&(p.len() as u64).to_le_bytes());
        all.extend_from_slice(p);
    }
    let hex = ppipe_core::predlog::digest_hex(&all);
    format!("ppipe-{}", &hex[..16])
}
