use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use ppipe_core::config::PipelineConfig;
use ppipe_core::ensemble::predict_composed;
use ppipe_core::predlog::timestamp_now;
use ppipe_core::prompt::{compose_input, render_prompt};
use ppipe_core::{
    AuthorProfile, BackendRegistry, EnsembleConfig, Error, LabelSet, LogRecord, PredictionLog, PredictionResponse,
    PromptTemplate,
};

use crate::wire::{ErrorCode, PredictionRequest, ServiceError};

pub const DEFAULT_MAX_ESSAY_CHARS: usize = 20_000;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Sends finished responses to a background thread that owns the log file.
/// Sending never blocks; write failures are reported through `tracing`.
#[derive(Clone)]
pub struct LogSink {
    tx: mpsc::Sender<LogRecord>,
}

impl LogSink {
    pub fn spawn(log: PredictionLog) -> Self {
        let (tx, rx) = mpsc::channel::<LogRecord>();
        thread::Builder::new()
            .name("prediction-log".into())
            .spawn(move || {
                for record in rx {
                    if let Err(e) = log.append(&record) {
                        tracing::warn!(path = %log.path().display(), error = %e, "prediction log write failed");
                    }
                }
            })
            .expect("spawn log thread");
        LogSink { tx }
    }

    fn send(&self, record: LogRecord) {
        if self.tx.send(record).is_err() {
            tracing::warn!("prediction log writer has stopped");
        }
    }
}

/// Immutable state shared by every connection.
pub struct ServiceState {
    pub registry: BackendRegistry,
    pub ensemble: EnsembleConfig,
    pub template: PromptTemplate,
    pub labels: LabelSet,
    pub model_version: String,
    pub max_essay_chars: usize,
    pub max_in_flight: usize,
    pub log: Option<LogSink>,
    /// Whether log lines carry the composed input or only its hash.
    pub log_inputs: bool,
}

impl ServiceState {
    pub fn new(
        registry: BackendRegistry,
        ensemble: EnsembleConfig,
        model_version: impl Into<String>,
    ) -> Result<Self, Error> {
        ensemble.validate(&registry)?;
        Ok(ServiceState {
            registry,
            ensemble,
            template: PromptTemplate::default(),
            labels: LabelSet::default(),
            model_version: model_version.into(),
            max_essay_chars: DEFAULT_MAX_ESSAY_CHARS,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            log: None,
            log_inputs: true,
        })
    }

    /// State configured from the pipeline config. An empty `ensemble.backends`
    /// list means every registered backend.
    pub fn from_config(
        cfg: &PipelineConfig,
        registry: BackendRegistry,
        model_version: impl Into<String>,
    ) -> Result<Self, Error> {
        let ids = if cfg.ensemble.backends.is_empty() {
            registry.ids()
        } else {
            cfg.ensemble.backends.clone()
        };
        let ensemble = EnsembleConfig {
            clamp: cfg.ensemble.clamp,
            allow_partial: cfg.ensemble.allow_partial,
            ..EnsembleConfig::new(ids)
        };
        let mut state = ServiceState::new(registry, ensemble, model_version)?;
        state.template = cfg.template()?;
        state.labels = cfg.labels.clone();
        state.max_essay_chars = cfg.service.max_essay_chars;
        state.max_in_flight = cfg.service.max_in_flight;
        state.log_inputs = cfg.service.log_inputs;
        if let Some(path) = &cfg.service.log_path {
            state.log = Some(LogSink::spawn(PredictionLog::open(path, cfg.labels.clone())?));
        }
        Ok(state)
    }

    pub fn with_log(mut self, log: PredictionLog) -> Self {
        self.log = Some(LogSink::spawn(log));
        self
    }

    /// Validates a request, runs the ensemble and stamps the response at completion.
    pub async fn handle_predict(&self, req: PredictionRequest) -> Result<PredictionResponse, ServiceError> {
        let started = Instant::now();
        let rid = Some(req.request_id.clone());
        if req.request_id.is_empty() {
            return Err(ServiceError::new(
                ErrorCode::BadRequest,
                None,
                "request_id must be non-empty",
            ));
        }
        let chars = req.essay.chars().count();
        if chars > self.max_essay_chars {
            return Err(ServiceError::new(
                ErrorCode::TooLarge,
                rid,
                format!("essay has {chars} characters; the limit is {}", self.max_essay_chars),
            ));
        }
        let p = &req.profile;
        let profile = AuthorProfile::from_raw(&p.gender, p.education, p.race, p.age, p.income)
            .map_err(|e| ServiceError::new(ErrorCode::BadRequest, rid.clone(), e.to_string()))?;
        let prompt = render_prompt(&profile, &self.template)
            .map_err(|e| ServiceError::new(ErrorCode::BadRequest, rid.clone(), e.to_string()))?;
        let input = compose_input(&prompt, &req.essay, &self.template);

        let out = predict_composed(&self.ensemble, &self.registry, &self.labels, input)
            .await
            .map_err(|e| match e {
                Error::Ensemble { failed, causes } => ServiceError {
                    code: ErrorCode::BackendError,
                    request_id: rid.clone(),
                    message: causes.join("; "),
                    backend_ids: failed,
                },
                other => ServiceError::new(ErrorCode::BadRequest, rid.clone(), other.to_string()),
            })?;

        let response = PredictionResponse {
            request_id: req.request_id,
            scores: out.scores,
            per_backend: out.per_backend,
            timestamp: timestamp_now(),
            latency_ms: started.elapsed().as_millis() as u64,
            model_version: self.model_version.clone(),
        };
        if let Some(log) = &self.log {
            log.send(LogRecord::new(response.clone(), &out.input, self.log_inputs));
        }
        Ok(response)
    }
}
