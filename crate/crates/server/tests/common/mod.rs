#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use futures::{SinkExt, StreamExt};
use ppipe_core::{
    fnv1a64, AuthorProfile, BackendKind, BackendRegistry, Baseline, BaselineBackend, EnsembleConfig, Error, LabelSet,
    PredictionBackend, ScoreVector,
};
use ppipe_server::{Server, ServiceState};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

/// Scores derived from the input, after an input-dependent delay.
pub struct SlowBackend {
    pub id: String,
    pub max_delay_ms: u64,
    pub scale: f64,
}

impl SlowBackend {
    pub fn scores(&self, input: &str) -> ScoreVector {
        let h = fnv1a64(input.as_bytes());
        ScoreVector::from_fn(|i| self.scale * (((h >> (i * 5)) & 0x3ff) as f64 / 64.0 - 8.0))
    }
}

#[async_trait]
impl PredictionBackend for SlowBackend {
    fn id(&self) -> &str {
        &self.id
    }
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }
    async fn predict(&self, input: &str) -> ppipe_core::Result<ScoreVector> {
        if self.max_delay_ms > 0 {
            let d = fnv1a64(input.as_bytes()) % (self.max_delay_ms + 1);
            tokio::time::sleep(Duration::from_millis(d)).await;
        }
        Ok(self.scores(input))
    }
}

pub struct FailingBackend(pub String);

#[async_trait]
impl PredictionBackend for FailingBackend {
    fn id(&self) -> &str {
        &self.0
    }
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }
    async fn predict(&self, _input: &str) -> ppipe_core::Result<ScoreVector> {
        Err(Error::Backend {
            id: self.0.clone(),
            message: "connection refused".into(),
        })
    }
}

pub fn zero_backend(id: &str) -> Arc<dyn PredictionBackend> {
    let model = Baseline::zero(1 << 10, LabelSet::default()).unwrap();
    Arc::new(BaselineBackend::new(id, Arc::new(model)))
}

pub fn state(backends: Vec<Arc<dyn PredictionBackend>>) -> ServiceState {
    let mut reg = BackendRegistry::new();
    for b in backends {
        reg.register(b).unwrap();
    }
    let ids = reg.ids();
    ServiceState::new(reg, EnsembleConfig::new(ids), "ppipe-test").unwrap()
}

pub struct Running {
    pub addr: SocketAddr,
    pub stop: Option<oneshot::Sender<()>>,
    pub handle: JoinHandle<Result<(), ppipe_server::ServeError>>,
}

impl Running {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        tokio::time::timeout(Duration::from_secs(10), self.handle)
            .await
            .expect("server stops")
            .unwrap()
            .unwrap();
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

pub async fn start(state: ServiceState) -> Running {
    let server = Server::bind("127.0.0.1:0".parse().unwrap(), Arc::new(state))
        .await
        .unwrap();
    let addr = server.local_addr().unwrap();
    let (tx, rx) = oneshot::channel();
    let handle = tokio::spawn(server.run(async move {
        let _ = rx.await;
    }));
    Running {
        addr,
        stop: Some(tx),
        handle,
    }
}

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub async fn connect(addr: SocketAddr) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws"))
        .await
        .unwrap();
    ws
}

pub async fn send(ws: &mut Ws, v: &Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

pub async fn recv(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("reply in time")
            .expect("stream open")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

pub fn profile() -> AuthorProfile {
    AuthorProfile::new("female", 4, 3, 22, 100000).unwrap()
}

pub fn scores_of(v: &Value, labels: &LabelSet) -> ScoreVector {
    labels.from_json(v).unwrap()
}
