//! `ppipe` subcommands. Each command is a plain function so it can be driven
//! from tests; `main` only parses arguments and maps errors to exit codes.

use std::collections::HashSet;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use futures::stream::{self, StreamExt, TryStreamExt};
use serde_json::{json, Map, Value};

use ppipe_core::augment::AEDA_MARKS;
use ppipe_core::baseline::TrainParams;
use ppipe_core::config::{resolve_port, PORT_ENV};
use ppipe_core::corpus::read_corpus;
use ppipe_core::{
    augment_corpus, ensemble_predict, evaluate, train_baseline, AugmentationConfig, AuthorProfile, BackendRegistry,
    Baseline, BaselineBackend, EnsembleConfig, EnsembleOutput, Error, EssayRecord, EvalReport, PipelineConfig,
    RemoteBackend, Result, TrainReport,
};
use ppipe_server::{model_version, Server, ServiceState};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Bad input: unreadable or malformed corpus, config or model, invalid arguments.
pub const EXIT_INPUT: i32 = 2;
/// A backend failed or a computation broke down numerically.
pub const EXIT_RUNTIME: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Record { source, .. } => exit_code(source),
        Error::Numerical(_) | Error::Backend { .. } | Error::Protocol { .. } | Error::Ensemble { .. } => EXIT_RUNTIME,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ppipe",
    version,
    about = "Personality and empathy score prediction from essays"
)]
pub struct Cli {
    /// Pipeline config (TOML). Command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a corpus parses and every record is valid.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Require all label columns.
        #[arg(long)]
        labels: bool,
    },
    /// Write the corpus plus punctuation-augmented copies of every record.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        copies: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// `default`, `aeda`, or the marks themselves as one string (e.g. ".,!").
        #[arg(long)]
        marks: Option<String>,
    },
    /// Fit the ridge baseline on a labeled corpus.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Augmented copies per record added before fitting.
        #[arg(long)]
        copies: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        feature_dim: Option<usize>,
    },
    /// Score a corpus or a single record; prints one JSON object per record.
    Predict {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long = "in", conflicts_with = "essay")]
        input: Option<PathBuf>,
        #[command(flatten)]
        record: RecordArgs,
    },
    /// Pearson correlation and MAE of the ensemble against gold labels.
    Eval {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the websocket/HTTP prediction service.
    Serve {
        #[command(flatten)]
        models: ModelArgs,
        /// Overrides both the config and PPIPE_PORT.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<IpAddr>,
        /// Append every prediction to this JSON-lines file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Baseline model file; repeat for an ensemble.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RecordArgs {
    #[arg(long, default_value = "1")]
    pub id: String,
    #[arg(long, requires_all = ["gender", "education", "race", "age", "income"])]
    pub essay: Option<String>,
    #[arg(long)]
    pub gender: Option<String>,
    #[arg(long)]
    pub education: Option<i64>,
    #[arg(long)]
    pub race: Option<i64>,
    #[arg(long)]
    pub age: Option<i64>,
    #[arg(long)]
    pub income: Option<i64>,
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

/// Parses the `--marks` argument.
pub fn parse_marks(spec: &str) -> Result<Vec<char>> {
    match spec {
        "default" => Ok(ppipe_core::augment::DEFAULT_MARKS.to_vec()),
        "aeda" => Ok(AEDA_MARKS.to_vec()),
        other => {
            let marks: Vec<char> = other.chars().collect();
            let cfg = AugmentationConfig {
                marks: marks.clone(),
                ..Default::default()
            };
            cfg.validate_marks()?;
            Ok(marks)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSummary {
    pub records: usize,
    pub labeled: usize,
}

pub fn cmd_validate(input: &Path, cfg: &PipelineConfig, require_labels: bool) -> Result<ValidateSummary> {
    let records = read_corpus(input, &cfg.schema(), require_labels)?;
    let template = cfg.template()?;
    for r in &records {
        if r.essay.is_empty() {
            return Err(Error::Validation(format!("record `{}` has an empty essay", r.id)));
        }
        ppipe_core::render_prompt(&r.profile, &template).map_err(|e| Error::Record {
            id: r.id.clone(),
            source: Box::new(e),
        })?;
    }
    let mut ids = HashSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(r.id.as_str())) {
        return Err(Error::Validation(format!("duplicate record id `{}`", dup.id)));
    }
    Ok(ValidateSummary {
        records: records.len(),
        labeled: records.iter().filter(|r| r.gold.is_some()).count(),
    })
}

pub fn cmd_augment(input: &Path, out: &Path, aug: &AugmentationConfig, cfg: &PipelineConfig) -> Result<usize> {
    let schema = cfg.schema();
    let records = read_corpus(input, &schema, false)?;
    let all = augment_corpus(&records, aug)?;
    ppipe_core::write_corpus(&all, &schema, out)?;
    Ok(all.len())
}

#[derive(Debug, Clone, Default)]
pub struct TrainOverrides {
    pub copies: Option<u32>,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub feature_dim: Option<usize>,
}

/// Reads a labeled corpus, optionally augments it, fits and saves the model.
pub fn cmd_train(input: &Path, out: &Path, ov: &TrainOverrides, cfg: &PipelineConfig) -> Result<TrainReport> {
    let records = read_corpus(input, &cfg.schema(), true)?;
    let copies = ov.copies.unwrap_or(cfg.train.copies);
    let records = if copies > 0 {
        let mut aug = cfg.augmentation()?;
        aug.copies = copies;
        if let Some(seed) = ov.seed {
            aug.seed = seed;
        }
        augment_corpus(&records, &aug)?
    } else {
        records
    };
    let params = TrainParams {
        lambda: ov.lambda.unwrap_or(cfg.train.lambda),
        feature_dim: ov.feature_dim.unwrap_or(cfg.train.feature_dim),
        labels: cfg.labels.clone(),
    };
    let (model, report) = train_baseline(&records, &cfg.template()?, &params)?;
    model.save(out)?;
    Ok(report)
}

pub fn format_train_report(r: &TrainReport) -> String {
    format!(
        "records\t{}\nfeature_dim\t{}\nactive_features\t{}\nsolver\t{}\nobjective\t{}\nmse\t{}\nmax_abs_residual\t{}\n",
        r.records,
        r.feature_dim,
        r.active_features,
        format!("{:?}", r.solver).to_lowercase(),
        r.objective,
        r.mse,
        r.max_abs_residual
    )
}

/// Backend id for each model path: the file stem, with `-2`, `-3`, ... added on repeats.
pub fn model_ids(paths: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "model".into());
            let mut id = stem.clone();
            let mut n = 1;
            while !seen.insert(id.clone()) {
                n += 1;
                id = format!("{stem}-{n}");
            }
            id
        })
        .collect()
}

/// Loaded models and remote backends, ready for prediction.
pub struct Ensemble {
    pub registry: BackendRegistry,
    pub config: EnsembleConfig,
    /// Hash of every model file and remote id, for `model_version`.
    pub version: String,
}

pub fn load_ensemble(paths: &[PathBuf], cfg: &PipelineConfig) -> Result<Ensemble> {
    if paths.is_empty() && cfg.remote.is_empty() {
        return Err(Error::Config(
            "no backends: pass --model or configure [[remote]]".into(),
        ));
    }
    let mut registry = BackendRegistry::new();
    let mut parts: Vec<Vec<u8>> = Vec::new();
    for (path, id) in paths.iter().zip(model_ids(paths)) {
        let model = Baseline::load(path)?;
        if model.labels.names != cfg.labels.names {
            return Err(Error::ModelFormat(format!(
                "{}: label names differ from the configured labels",
                path.display()
            )));
        }
        parts.push(model.to_bytes());
        registry.register(Arc::new(BaselineBackend::new(id, Arc::new(model))))?;
    }
    for r in &cfg.remote {
        let backend = RemoteBackend::new(&r.id, &r.url, cfg.labels.clone(), Duration::from_millis(r.timeout_ms))?;
        parts.push(format!("remote:{}:{}", r.id, r.url).into_bytes());
        registry.register(Arc::new(backend))?;
    }
    let ids = if cfg.ensemble.backends.is_empty() {
        registry.ids()
    } else {
        cfg.ensemble.backends.clone()
    };
    let config = EnsembleConfig {
        clamp: cfg.ensemble.clamp,
        allow_partial: cfg.ensemble.allow_partial,
        ..EnsembleConfig::new(ids)
    };
    config.validate(&registry)?;
    let version = model_version(parts.iter().map(Vec::as_slice));
    Ok(Ensemble {
        registry,
        config,
        version,
    })
}

const PREDICT_CONCURRENCY: usize = 16;

/// Ensemble output for every record, in input order.
pub async fn predict_records(
    ens: &Ensemble,
    records: &[EssayRecord],
    cfg: &PipelineConfig,
) -> Result<Vec<EnsembleOutput>> {
    let template = cfg.template()?;
    stream::iter(records.iter().map(|r| {
        let template = &template;
        async move {
            ensemble_predict(&ens.config, &ens.registry, template, &cfg.labels, &r.profile, &r.essay)
                .await
                .map_err(|e| Error::Record {
                    id: r.id.clone(),
                    source: Box::new(e),
                })
        }
    }))
    .buffered(PREDICT_CONCURRENCY)
    .try_collect()
    .await
}

pub fn prediction_json(id: &str, out: &EnsembleOutput, cfg: &PipelineConfig) -> Value {
    let per_backend: Map<String, Value> = out
        .per_backend
        .iter()
        .map(|(b, s)| (b.clone(), cfg.labels.to_json(s)))
        .collect();
    let mut v = json!({
        "id": id,
        "scores": cfg.labels.to_json(&out.scores),
        "per_backend": per_backend,
    });
    if !out.failed.is_empty() {
        v["failed"] = json!(out.failed);
    }
    v
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

pub fn cmd_predict(
    models: &[PathBuf],
    input: Option<&Path>,
    record: &RecordArgs,
    cfg: &PipelineConfig,
    out: &mut dyn Write,
) -> Result<usize> {
    let records = match (input, &record.essay) {
        (Some(path), _) => read_corpus(path, &cfg.schema(), false)?,
        (None, Some(essay)) => {
            let profile = AuthorProfile::from_raw(
                record.gender.as_deref().unwrap_or_default(),
                record.education.unwrap_or_default(),
                record.race.unwrap_or_default(),
                record.age.unwrap_or_default(),
                record.income.unwrap_or_default(),
            )?;
            vec![EssayRecord {
                id: record.id.clone(),
                essay: essay.clone(),
                profile,
                gold: None,
                origin: None,
            }]
        }
        (None, None) => return Err(Error::Validation("pass --in or --essay with the profile flags".into())),
    };
    let ens = load_ensemble(models, cfg)?;
    let outputs = runtime()?.block_on(predict_records(&ens, &records, cfg))?;
    for (r, o) in records.iter().zip(&outputs) {
        writeln!(out, "{}", prediction_json(&r.id, o, cfg))?;
    }
    Ok(records.len())
}

pub fn cmd_eval(models: &[PathBuf], input: &Path, cfg: &PipelineConfig) -> Result<EvalReport<f64>> {
    let records = read_corpus(input, &cfg.schema(), true)?;
    let ens = load_ensemble(models, cfg)?;
    let outputs = runtime()?.block_on(predict_records(&ens, &records, cfg))?;
    let predicted: Vec<_> = outputs.iter().map(|o| o.scores).collect();
    let gold: Vec<_> = records.iter().map(|r| r.gold.expect("labels were required")).collect();
    evaluate(&predicted, &gold, &cfg.labels)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

pub fn format_eval_table(r: &EvalReport<f64>) -> String {
    let mut s = format!("{:<22}{:>9}{:>9}\n", "label", "pearson", "mae");
    for m in &r.labels {
        s += &format!("{:<22}{:>9}{:>9.4}\n", m.name, fmt_opt(m.pearson), m.mae);
    }
    s += &format!(
        "{:<22}{:>9}{:>9.4}\n",
        "personality (mean)",
        fmt_opt(r.personality_pearson),
        r.personality_mae
    );
    s += &format!("{:<22}{:>9}{:>9.4}\n", "iri (mean)", fmt_opt(r.iri_pearson), r.iri_mae);
    s += &format!("records: {}\n", r.records);
    s
}

pub fn eval_json(r: &EvalReport<f64>) -> Value {
    let labels: Map<String, Value> = r
        .labels
        .iter()
        .map(|m| (m.name.clone(), json!({"pearson": m.pearson, "mae": m.mae})))
        .collect();
    json!({
        "records": r.records,
        "labels": labels,
        "personality": {"pearson": r.personality_pearson, "mae": r.personality_mae},
        "iri": {"pearson": r.iri_pearson, "mae": r.iri_mae},
    })
}

/// Listen address: `--port` wins, then `PPIPE_PORT`, then the config.
pub fn serve_addr(
    cfg: &PipelineConfig,
    port: Option<u16>,
    bind: Option<IpAddr>,
    env_port: Option<&str>,
) -> Result<SocketAddr> {
    let port = match port {
        Some(p) => p,
        None => resolve_port(cfg.service.port, env_port)?,
    };
    let ip = match bind {
        Some(ip) => ip,
        None => cfg
            .service
            .bind
            .parse()
            .map_err(|_| Error::Config(format!("service.bind {:?} is not an IP address", cfg.service.bind)))?,
    };
    Ok(SocketAddr::new(ip, port))
}

pub fn service_state(models: &[PathBuf], cfg: &PipelineConfig) -> Result<ServiceState> {
    let ens = load_ensemble(models, cfg)?;
    let mut cfg = cfg.clone();
    cfg.ensemble.backends = ens.config.backend_ids.clone();
    ServiceState::from_config(&cfg, ens.registry, ens.version)
}

pub fn cmd_serve(
    models: &[PathBuf],
    port: Option<u16>,
    bind: Option<IpAddr>,
    log: Option<PathBuf>,
    cfg: &PipelineConfig,
) -> Result<()> {
    let mut cfg = cfg.clone();
    if log.is_some() {
        cfg.service.log_path = log;
    }
    let env_port = std::env::var(PORT_ENV).ok();
    let addr = serve_addr(&cfg, port, bind, env_port.as_deref())?;
    let state = Arc::new(service_state(models, &cfg)?);
    runtime()?.block_on(async move {
        let server = Server::bind(addr, state.clone())
            .await
            .map_err(|e| Error::Config(e.to_string()))?;
        let local = server.local_addr()?;
        eprintln!(
            "listening on {local} (backends: {}; model_version {})",
            state.ensemble.backend_ids.join(", "),
            state.model_version
        );
        server
            .run(ppipe_server::shutdown_signal())
            .await
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    })
}

/// Runs a parsed command, writing normal output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Validate { input, labels } => {
            let s = cmd_validate(&input, &cfg, labels)?;
            writeln!(out, "ok: {} records, {} labeled", s.records, s.labeled)?;
        }
        Command::Augment {
            input,
            out: dest,
            copies,
            seed,
            marks,
        } => {
            let mut aug = cfg.augmentation()?;
            if let Some(c) = copies {
                aug.copies = c;
            }
            if let Some(s) = seed {
                aug.seed = s;
            }
            if let Some(m) = marks {
                aug.marks = parse_marks(&m)?;
            }
            let n = cmd_augment(&input, &dest, &aug, &cfg)?;
            writeln!(out, "wrote {n} records to {}", dest.display())?;
        }
        Command::Train {
            input,
            out: dest,
            copies,
            seed,
            lambda,
            feature_dim,
        } => {
            let ov = TrainOverrides {
                copies,
                seed,
                lambda,
                feature_dim,
            };
            let report = cmd_train(&input, &dest, &ov, &cfg)?;
            write!(out, "{}", format_train_report(&report))?;
        }
        Command::Predict { models, input, record } => {
            cmd_predict(&models.models, input.as_deref(), &record, &cfg, out)?;
        }
        Command::Eval { models, input, json } => {
            let r = cmd_eval(&models.models, &input, &cfg)?;
            if json {
                writeln!(out, "{}", eval_json(&r))?;
            } else {
                write!(out, "{}", format_eval_table(&r))?;
            }
        }
        Command::Serve {
            models,
            port,
            bind,
            log,
        } => cmd_serve(&models.models, port, bind, log, &cfg)?,
    }
    Ok(())
}
