//! Ensemble prediction by coordinate-wise averaging of backend outputs.

use futures::future::join_all;
use serde::{Deserialize, Serialize};

use crate::backend::BackendRegistry;
use crate::prompt::{compose_input, render_prompt, AuthorProfile, PromptTemplate};
use crate::scores::{LabelSet, Scores};
use crate::{Error, Result, Scalar, ScoreVector};

/// Coordinate-wise arithmetic mean `(1/N) sum_i v_i`.
///
/// A coordinate on which every input agrees is returned unchanged, so
/// averaging copies of one vector reproduces it bit for bit.
pub fn average_scores<T: Scalar>(vectors: &[Scores<T>]) -> Result<Scores<T>> {
    if vectors.is_empty() {
        return Err(Error::Validation(
            "cannot average an empty list of score vectors".into(),
        ));
    }
    if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "score vector {i} contains non-finite values"
        )));
    }
    let n = T::from_usize_lossy(vectors.len());
    Ok(Scores::from_fn(|j| {
        let first = vectors[0][j];
        if vectors.iter().all(|v| v[j] == first) {
            first
        } else {
            vectors.iter().map(|v| v[j]).sum::<T>() / n
        }
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub backend_ids: Vec<String>,
    pub combiner: Combiner,
    /// Clamp the combined scores into the label ranges.
    pub clamp: bool,
    /// Average whichever backends succeed instead of failing the request.
    pub allow_partial: bool,
}

impl EnsembleConfig {
    pub fn new(backend_ids: Vec<String>) -> Self {
        EnsembleConfig {
            backend_ids,
            combiner: Combiner::Mean,
            clamp: false,
            allow_partial: false,
        }
    }

    pub fn validate(&self, registry: &BackendRegistry) -> Result<()> {
        if self.backend_ids.is_empty() {
            return Err(Error::Config("ensemble needs at least one backend".into()));
        }
        for (i, id) in self.backend_ids.iter().enumerate() {
            if self.backend_ids[..i].contains(id) {
                return Err(Error::Config(format!("backend `{id}` listed twice in the ensemble")));
            }
            if registry.get(id).is_none() {
                return Err(Error::Config(format!("ensemble backend `{id}` is not registered")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    /// Composed model input (prompt prefix, separator, essay).
    pub input: String,
    pub scores: ScoreVector,
    /// Scores of every backend that contributed, in configuration order.
    pub per_backend: Vec<(String, ScoreVector)>,
    /// Backends that failed; only non-empty with `allow_partial`.
    pub failed: Vec<String>,
}

impl EnsembleOutput {
    pub fn n_effective(&self) -> usize {
        self.per_backend.len()
    }
}

/// Scores an already composed input with every configured backend concurrently.
pub async fn predict_composed(
    cfg: &EnsembleConfig,
    registry: &BackendRegistry,
    labels: &LabelSet,
    input: String,
) -> Result<EnsembleOutput> {
    cfg.validate(registry)?;
    let calls = cfg.backend_ids.iter().map(|id| {
        let backend = registry.get(id).expect("validated above").clone();
        let input = &input;
        async move { (id.clone(), backend.predict(input).await) }
    });
    let results = join_all(calls).await;

    let mut per_backend = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    let mut causes = Vec::new();
    for (id, r) in results {
        match r {
            Ok(s) if s.is_finite() => per_backend.push((id, s)),
            Ok(_) => {
                causes.push(format!("backend `{id}` returned non-finite scores"));
                failed.push(id);
            }
            Err(e) => {
                causes.push(e.to_string());
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() && (!cfg.allow_partial || per_backend.is_empty()) {
        return Err(Error::Ensemble { failed, causes });
    }
    let vectors: Vec<ScoreVector> = per_backend.iter().map(|(_, s)| *s).collect();
    let mut scores = match cfg.combiner {
        Combiner::Mean => average_scores(&vectors)?,
    };
    if cfg.clamp {
        scores = scores.clamp_to(labels);
    }
    Ok(EnsembleOutput {
        input,
        scores,
        per_backend,
        failed,
    })
}

/// Renders the prompt, prefixes the essay and averages all backend predictions.
pub async fn ensemble_predict(
    cfg: &EnsembleConfig,
    registry: &BackendRegistry,
    template: &PromptTemplate,
    labels: &LabelSet,
    profile: &AuthorProfile,
    essay: &str,
) -> Result<EnsembleOutput> {
    let prompt = render_prompt(profile, template)?;
    let input = compose_input(&prompt, essay, template);
    predict_composed(cfg, registry, labels, input).await
}
