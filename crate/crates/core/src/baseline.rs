//! Hashed bag-of-words ridge baseline and its model file.
//!
//! Model file layout (UTF-8 text, `\n` line endings, fields separated by `\t`):
//!
//! ```text
//! PPIPE1
//! feature_dim <power of two>
//! lambda      <float>
//! label       <name> <lo> <hi>        (nine lines, label order)
//! rows        <count>
//! <index>     <w_1> ... <w_9>         (count lines, increasing index)
//! ```
//!
//! Only rows with a nonzero weight are stored; the bias row has index
//! `feature_dim`. Floats are written in Rust's shortest round-trip decimal
//! form, so saving the same model twice gives identical bytes.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::EssayRecord;
use crate::features::{check_feature_dim, featurize, SparseFeatures, DEFAULT_FEATURE_DIM};
use crate::linalg::DenseMatrix;
use crate::prompt::{compose_input, render_prompt, PromptTemplate};
use crate::ridge::{fit_ridge, ridge_loss, Solver, SparseDesign};
use crate::scores::{LabelSet, Scores, NUM_LABELS};
use crate::{Error, Result, Scalar};

pub const MODEL_MAGIC: &str = "PPIPE1";
pub const HASH_ALGO: &str = "fnv1a64";

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel<T> {
    pub feature_dim: usize,
    pub lambda: T,
    pub labels: LabelSet,
    /// Nonzero weight rows keyed by feature index; `feature_dim` is the bias.
    pub rows: BTreeMap<usize, Scores<T>>,
}

impl<T: Scalar> BaselineModel<T> {
    pub fn zero(feature_dim: usize, labels: LabelSet) -> Result<Self> {
        check_feature_dim(feature_dim)?;
        Ok(BaselineModel {
            feature_dim,
            lambda: T::zero(),
            labels,
            rows: BTreeMap::new(),
        })
    }

    /// Model that ignores its input and always returns `bias`.
    pub fn constant(feature_dim: usize, labels: LabelSet, bias: Scores<T>) -> Result<Self> {
        let mut m = Self::zero(feature_dim, labels)?;
        if bias != Scores::zeros() {
            m.rows.insert(feature_dim, bias);
        }
        Ok(m)
    }

    pub fn predict_features(&self, x: &SparseFeatures<T>) -> Scores<T> {
        let mut out = Scores::zeros();
        for &(idx, v) in &x.entries {
            if let Some(w) = self.rows.get(&idx) {
                for j in 0..NUM_LABELS {
                    out[j] = out[j] + v * w[j];
                }
            }
        }
        out
    }

    pub fn predict_text(&self, text: &str) -> Scores<T> {
        let x = featurize(text, self.feature_dim).expect("feature_dim validated at construction");
        self.predict_features(&x)
    }

    pub fn validate(&self) -> Result<()> {
        check_feature_dim(self.feature_dim)?;
        self.labels.validate()?;
        if let Some((&idx, _)) = self.rows.iter().next_back() {
            if idx > self.feature_dim {
                return Err(Error::ModelFormat(format!(
                    "weight row index {idx} exceeds feature_dim"
                )));
            }
        }
        if !self.rows.values().all(Scores::is_finite) {
            return Err(Error::ModelFormat("weights must be finite".into()));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MODEL_MAGIC}")?;
        writeln!(w, "feature_dim\t{}", self.feature_dim)?;
        writeln!(w, "hash\t{HASH_ALGO}")?;
        writeln!(w, "lambda\t{}", self.lambda.as_f64())?;
        for (name, (lo, hi)) in self.labels.names.iter().zip(&self.labels.ranges) {
            writeln!(w, "label\t{name}\t{lo}\t{hi}")?;
        }
        writeln!(w, "rows\t{}", self.rows.len())?;
        for (idx, row) in &self.rows {
            write!(w, "{idx}")?;
            for v in row.iter() {
                write!(w, "\t{}", v.as_f64())?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io_at(path, e))?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            match lines.next() {
                Some((n, line)) => Ok((n + 1, line?.split('\t').map(str::to_string).collect())),
                None => Err(Error::ModelFormat(format!("unexpected end of file, expected {what}"))),
            }
        };
        let bad = |n: usize, msg: String| Error::ModelFormat(format!("line {n}: {msg}"));

        let (n, magic) = next("header")?;
        if magic != [MODEL_MAGIC] {
            return Err(bad(n, format!("missing `{MODEL_MAGIC}` header")));
        }
        let field = |n: usize, parts: &[String], key: &str| -> Result<String> {
            match parts {
                [k, v] if k == key => Ok(v.clone()),
                _ => Err(bad(n, format!("expected `{key}\\t<value>`"))),
            }
        };
        let (n, parts) = next("feature_dim")?;
        let feature_dim: usize = field(n, &parts, "feature_dim")?
            .parse()
            .map_err(|e| bad(n, format!("feature_dim: {e}")))?;
        let (n, parts) = next("hash")?;
        let hash = field(n, &parts, "hash")?;
        if hash != HASH_ALGO {
            return Err(bad(n, format!("unsupported hash `{hash}`")));
        }
        let (n, parts) = next("lambda")?;
        let lambda: f64 = field(n, &parts, "lambda")?
            .parse()
            .map_err(|e| bad(n, format!("lambda: {e}")))?;

        let mut labels = LabelSet {
            names: Vec::with_capacity(NUM_LABELS),
            ranges: Vec::with_capacity(NUM_LABELS),
        };
        for _ in 0..NUM_LABELS {
            let (n, parts) = next("label")?;
            match parts.as_slice() {
                [k, name, lo, hi] if k == "label" => {
                    let lo: f64 = lo.parse().map_err(|e| bad(n, format!("label range: {e}")))?;
                    let hi: f64 = hi.parse().map_err(|e| bad(n, format!("label range: {e}")))?;
                    labels.names.push(name.clone());
                    labels.ranges.push((lo, hi));
                }
                _ => return Err(bad(n, "expected `label\\t<name>\\t<lo>\\t<hi>`".into())),
            }
        }
        let (n, parts) = next("rows")?;
        let count: usize = field(n, &parts, "rows")?
            .parse()
            .map_err(|e| bad(n, format!("rows: {e}")))?;

        let mut rows = BTreeMap::new();
        let mut last: Option<usize> = None;
        for _ in 0..count {
            let (n, parts) = next("weight row")?;
            if parts.len() != NUM_LABELS + 1 {
                return Err(bad(n, format!("weight row needs {} fields", NUM_LABELS + 1)));
            }
            let idx: usize = parts[0].parse().map_err(|e| bad(n, format!("row index: {e}")))?;
            if last.is_some_and(|l| l >= idx) {
                return Err(bad(n, "row indices must be strictly increasing".into()));
            }
            last = Some(idx);
            let mut row = Scores::zeros();
            for j in 0..NUM_LABELS {
                let v: f64 = parts[j + 1].parse().map_err(|e| bad(n, format!("weight: {e}")))?;
                row[j] = T::from_f64_lossy(v);
            }
            rows.insert(idx, row);
        }
        if let Some((n, line)) = lines.next() {
            if !line?.is_empty() {
                return Err(bad(n + 1, "trailing data after weight rows".into()));
            }
        }
        let model = BaselineModel {
            feature_dim,
            lambda: T::from_f64_lossy(lambda),
            labels,
            rows,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Clone)]
pub struct TrainParams<T> {
    pub lambda: T,
    pub feature_dim: usize,
    pub labels: LabelSet,
}

impl<T: Scalar> Default for TrainParams<T> {
    fn default() -> Self {
        TrainParams {
            lambda: T::one(),
            feature_dim: DEFAULT_FEATURE_DIM,
            labels: LabelSet::default(),
        }
    }
}

/// Training summary. Residuals are measured on the training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub records: usize,
    pub feature_dim: usize,
    pub active_features: usize,
    pub solver: Solver,
    /// Ridge objective `||XW - Y||^2 + lambda ||W||^2` at the solution.
    pub objective: f64,
    pub mse: f64,
    pub max_abs_residual: f64,
}

/// Composed model inputs for `records` (prompt prefix plus essay).
pub fn model_inputs(records: &[EssayRecord], template: &PromptTemplate) -> Result<Vec<String>> {
    records
        .iter()
        .map(|r| Ok(compose_input(&render_prompt(&r.profile, template)?, &r.essay, template)))
        .collect()
}

/// Fits the baseline on prompt-prefixed essays.
///
/// Normal equations are formed over the active feature columns only; hash
/// slots that no training input touches keep a zero weight.
pub fn train_baseline<T: Scalar>(
    records: &[EssayRecord],
    template: &PromptTemplate,
    params: &TrainParams<T>,
) -> Result<(BaselineModel<T>, TrainReport)> {
    check_feature_dim(params.feature_dim)?;
    params.labels.validate()?;
    if records.is_empty() {
        return Err(Error::Validation("training needs at least one labeled record".into()));
    }
    let mut targets = Vec::with_capacity(records.len());
    for r in records {
        let gold = r
            .gold
            .ok_or_else(|| Error::Validation(format!("record `{}` has no gold labels", r.id)))?;
        targets.push(gold.0.iter().map(|v| T::from_f64_lossy(*v)).collect::<Vec<T>>());
    }
    let feats: Vec<SparseFeatures<T>> = model_inputs(records, template)?
        .iter()
        .map(|text| featurize(text, params.feature_dim))
        .collect::<Result<_>>()?;

    // Compact column space: sorted list of every index touched by some input.
    let mut active: Vec<usize> = feats.iter().flat_map(|f| f.entries.iter().map(|e| e.0)).collect();
    active.sort_unstable();
    active.dedup();
    let column_of = |idx: usize| active.binary_search(&idx).expect("index collected above");
    let design = SparseDesign::new(
        feats
            .iter()
            .map(|f| f.entries.iter().map(|&(i, v)| (column_of(i), v)).collect())
            .collect(),
        active.len(),
    );
    let y = DenseMatrix::from_rows(&targets);
    let (w, solver) = fit_ridge(&design, &y, params.lambda)?;
    if !w.is_finite() {
        return Err(Error::Numerical("ridge solution is not finite".into()));
    }

    let mut rows = BTreeMap::new();
    for (col, &idx) in active.iter().enumerate() {
        let row = Scores::from_fn(|j| w[(col, j)]);
        if row.iter().any(|v| *v != T::zero()) {
            rows.insert(idx, row);
        }
    }
    let model = BaselineModel {
        feature_dim: params.feature_dim,
        lambda: params.lambda,
        labels: params.labels.clone(),
        rows,
    };

    let pred = design.mul(&w);
    let residuals: Vec<f64> = pred
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(p, t)| (*p - *t).as_f64())
        .collect();
    let report = TrainReport {
        records: records.len(),
        feature_dim: params.feature_dim,
        active_features: active.len(),
        solver,
        objective: ridge_loss(&design, &y, &w, params.lambda).as_f64(),
        mse: residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64,
        max_abs_residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
    };
    Ok((model, report))
}
