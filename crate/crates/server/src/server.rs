use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tokio_util::task::TaskTracker;

use ppipe_core::predlog::{format_timestamp, parse_timestamp};

use crate::service::ServiceState;
use crate::wire::{result_json, ErrorCode, PredictionRequest, ServiceError};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
struct AppState {
    service: Arc<ServiceState>,
    shutdown: watch::Receiver<bool>,
    tracker: TaskTracker,
}

pub fn router(service: Arc<ServiceState>) -> Router {
    let (_tx, rx) = watch::channel(false);
    build_router(AppState {
        service,
        shutdown: rx,
        tracker: TaskTracker::new(),
    })
}

fn build_router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .route("/ws", get(ws_upgrade))
        .with_state(state)
}

async fn health(State(app): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "model_version": app.service.model_version,
        "backends": app.service.ensemble.backend_ids,
    }))
}

fn error_response(err: &ServiceError) -> Response {
    let status = StatusCode::from_u16(err.code.http_status()).unwrap_or(StatusCode::BAD_REQUEST);
    (status, Json(err.to_json())).into_response()
}

async fn predict(State(app): State<AppState>, body: Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            return error_response(&ServiceError::new(
                ErrorCode::BadRequest,
                None,
                format!("body is not JSON: {e}"),
            ))
        }
    };
    let req = match PredictionRequest::from_json(&value, false) {
        Ok(r) => r,
        Err(e) => return error_response(&e),
    };
    // Tracked so that shutdown waits for the prediction even if the client goes away.
    let service = app.service.clone();
    let task = app.tracker.spawn(async move { service.handle_predict(req).await });
    match task.await {
        Ok(Ok(resp)) => Json(resp.to_json(&app.service.labels)).into_response(),
        Ok(Err(e)) => error_response(&e),
        Err(e) => error_response(&ServiceError::new(
            ErrorCode::BackendError,
            None,
            format!("prediction task failed: {e}"),
        )),
    }
}

async fn ws_upgrade(State(app): State<AppState>, ws: WebSocketUpgrade) -> Response {
    let tracker = app.tracker.clone();
    ws.on_upgrade(move |socket| tracker.track_future(connection(socket, app)))
}

enum Outgoing {
    Result(ppipe_core::PredictionResponse),
    Error(ServiceError),
}

/// One websocket connection: reads requests, runs up to `max_in_flight` of
/// them concurrently, and writes replies in completion order with
/// non-decreasing timestamps.
async fn connection(socket: WebSocket, app: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Outgoing>();
    let labels = app.service.labels.clone();

    let writer = tokio::spawn(async move {
        let mut last: Option<DateTime<Utc>> = None;
        while let Some(msg) = rx.recv().await {
            let value = match msg {
                Outgoing::Result(mut resp) => {
                    if let Ok(ts) = parse_timestamp(&resp.timestamp) {
                        let ts = last.map_or(ts, |l| l.max(ts));
                        resp.timestamp = format_timestamp(ts);
                        last = Some(ts);
                    }
                    result_json(&resp, &labels)
                }
                Outgoing::Error(e) => e.to_json(),
            };
            if sink.send(Message::Text(value.to_string().into())).await.is_err() {
                return;
            }
        }
        let _ = sink.send(Message::Close(None)).await;
    });

    let in_flight = Arc::new(AtomicUsize::new(0));
    let tasks = TaskTracker::new();
    let mut shutdown = app.shutdown.clone();
    loop {
        let frame = tokio::select! {
            frame = stream.next() => frame,
            _ = shutdown.wait_for(|&stop| stop) => break,
        };
        let text = match frame {
            Some(Ok(Message::Text(t))) => t,
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
            Some(Ok(Message::Binary(_))) => {
                let _ = tx.send(Outgoing::Error(ServiceError::new(
                    ErrorCode::BadRequest,
                    None,
                    "binary frames are not supported",
                )));
                continue;
            }
            Some(Ok(_)) => continue,
        };
        let req = match serde_json::from_str::<Value>(text.as_str())
            .map_err(|e| ServiceError::new(ErrorCode::BadRequest, None, format!("frame is not JSON: {e}")))
            .and_then(|v| PredictionRequest::from_json(&v, true))
        {
            Ok(r) => r,
            Err(e) => {
                let _ = tx.send(Outgoing::Error(e));
                continue;
            }
        };
        if in_flight.load(Ordering::SeqCst) >= app.service.max_in_flight {
            let _ = tx.send(Outgoing::Error(ServiceError::new(
                ErrorCode::RateLimited,
                Some(req.request_id),
                format!(
                    "at most {} requests may be in flight per connection",
                    app.service.max_in_flight
                ),
            )));
            continue;
        }
        in_flight.fetch_add(1, Ordering::SeqCst);
        let (service, tx, in_flight) = (app.service.clone(), tx.clone(), in_flight.clone());
        tasks.spawn(async move {
            let out = match service.handle_predict(req).await {
                Ok(resp) => Outgoing::Result(resp),
                Err(e) => Outgoing::Error(e),
            };
            in_flight.fetch_sub(1, Ordering::SeqCst);
            let _ = tx.send(out);
        });
    }
    tasks.close();
    tasks.wait().await;
    drop(tx);
    let _ = writer.await;
}

/// A bound listener with the service state, ready to run.
pub struct Server {
    listener: TcpListener,
    service: Arc<ServiceState>,
}

impl Server {
    pub async fn bind(addr: SocketAddr, service: Arc<ServiceState>) -> Result<Self, ServeError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServeError::Bind { addr, source })?;
        Ok(Server { listener, service })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then stops accepting, lets in-flight
    /// predictions finish and their replies go out, and returns.
    pub async fn run<F>(self, shutdown: F) -> Result<(), ServeError>
    where
        F: Future<Output = ()> + Send + 'static,
    {
        let (stop_tx, stop_rx) = watch::channel(false);
        let tracker = TaskTracker::new();
        let app = build_router(AppState {
            service: self.service,
            shutdown: stop_rx,
            tracker: tracker.clone(),
        });
        axum::serve(self.listener, app)
            .with_graceful_shutdown(async move {
                shutdown.await;
                let _ = stop_tx.send(true);
            })
            .await?;
        tracker.close();
        tracker.wait().await;
        Ok(())
    }
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
