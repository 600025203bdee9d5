//! Core pipeline for predicting Big Five personality traits and Interpersonal
//! Reactivity Index subscales from essays plus author demographics.
//!
//! The numeric pieces (score vectors, ridge regression, ensembling, metrics)
//! are generic over a [`Scalar`] so they can run in `f32` or `f64`; the
//! aliases at the bottom of this file pin the `f64` instantiations that the
//! rest of the workspace uses.

pub mod augment;
pub mod backend;
pub mod baseline;
pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod linalg;
pub mod metrics;
pub mod predlog;
pub mod prompt;
pub mod ridge;
pub mod rng;
pub mod scalar;
pub mod scores;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use augment::{augment_corpus, augment_once, augment_record, AugmentationConfig};
pub use backend::{BackendKind, BackendRegistry, BaselineBackend, PredictionBackend, RemoteBackend};
pub use baseline::{train_baseline, BaselineModel, TrainReport};
pub use config::PipelineConfig;
pub use corpus::{parse_corpus, write_corpus, ColumnNames, CorpusSchema, EssayRecord};
pub use ensemble::{average_scores, ensemble_predict, EnsembleConfig, EnsembleOutput};
pub use features::{featurize, fnv1a64, SparseFeatures};
pub use metrics::{evaluate, mae, pearson, EvalReport};
pub use predlog::{append_prediction_log, LogRecord, PredictionLog, PredictionResponse};
pub use prompt::{compose_input, ordinal_word, render_prompt, AuthorProfile, PromptTemplate};
pub use scores::{LabelSet, Scores, NUM_LABELS};

/// Nine-label score vector in double precision.
pub type ScoreVector = Scores<f64>;
/// Hashed bag-of-words ridge model in double precision.
pub type Baseline = BaselineModel<f64>;
/// Dense matrix in double precision.
pub type Matrix = linalg::DenseMatrix<f64>;
