//! The nine prediction targets and the label metadata that names them.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Result, Scalar};

pub const NUM_LABELS: usize = 9;
/// The first `NUM_PERSONALITY` labels are personality traits, the rest IRI subscales.
pub const NUM_PERSONALITY: usize = 5;

/// One real value per label, in [`LabelSet`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores<T>(pub [T; NUM_LABELS]);

impl<T: Scalar> Scores<T> {
    pub fn zeros() -> Self {
        Scores([T::zero(); NUM_LABELS])
    }

    pub fn splat(v: T) -> Self {
        Scores([v; NUM_LABELS])
    }

    pub fn from_fn(f: impl FnMut(usize) -> T) -> Self {
        Scores(std::array::from_fn(f))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Scores::from_fn(|i| f(self.0[i]))
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.0.iter()
    }

    pub fn personality(&self) -> &[T] {
        &self.0[..NUM_PERSONALITY]
    }

    pub fn iri(&self) -> &[T] {
        &self.0[NUM_PERSONALITY..]
    }

    /// Clamp every coordinate into its label range.
    pub fn clamp_to(&self, labels: &LabelSet) -> Self {
        Scores::from_fn(|i| {
            let (lo, hi) = labels.ranges[i];
            let (lo, hi) = (T::from_f64_lossy(lo), T::from_f64_lossy(hi));
            self.0[i].max(lo).min(hi)
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T: Scalar> Default for Scores<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T> std::ops::Index<usize> for Scores<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> std::ops::IndexMut<usize> for Scores<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Names and value ranges of the nine labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSet {
    pub names: Vec<String>,
    pub ranges: Vec<(f64, f64)>,
}

pub const DEFAULT_LABEL_NAMES: [&str; NUM_LABELS] = [
    "conscientiousness",
    "openness",
    "extraversion",
    "agreeableness",
    "emotional_stability",
    "perspective_taking",
    "personal_distress",
    "fantasy",
    "empathic_concern",
];

impl Default for LabelSet {
    fn default() -> Self {
        LabelSet {
            names: DEFAULT_LABEL_NAMES.iter().map(|s| s.to_string()).collect(),
            ranges: (0..NUM_LABELS)
                .map(|i| if i < NUM_PERSONALITY { (1.0, 7.0) } else { (1.0, 5.0) })
                .collect(),
        }
    }
}

impl LabelSet {
    pub fn validate(&self) -> Result<()> {
        if self.names.len() != NUM_LABELS {
            return Err(Error::Config(format!(
                "expected {NUM_LABELS} label names, got {}",
                self.names.len()
            )));
        }
        if self.ranges.len() != NUM_LABELS {
            return Err(Error::Config(format!(
                "expected {NUM_LABELS} label ranges, got {}",
                self.ranges.len()
            )));
        }
        for (i, name) in self.names.iter().enumerate() {
            if name.is_empty() || name.contains(['\t', '\n', '\r']) {
                return Err(Error::Config(format!("invalid label name {name:?}")));
            }
            if self.names[..i].contains(name) {
                return Err(Error::Config(format!("duplicate label name {name:?}")));
            }
        }
        for &(lo, hi) in &self.ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("invalid label range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `{label: value}` object in label order.
    pub fn to_json<T: Scalar>(&self, scores: &Scores<T>) -> Value {
        let map: Map<String, Value> = self
            .names
            .iter()
            .zip(scores.iter())
            .map(|(name, v)| (name.clone(), json_number(v.as_f64())))
            .collect();
        Value::Object(map)
    }

    /// Inverse of [`LabelSet::to_json`]. Requires exactly the nine labels, all finite.
    pub fn from_json<T: Scalar>(&self, value: &Value) -> std::result::Result<Scores<T>, String> {
        let obj = value.as_object().ok_or("scores must be an object")?;
        if obj.len() != NUM_LABELS {
            return Err(format!("expected {NUM_LABELS} scores, got {}", obj.len()));
        }
        let mut out = Scores::<T>::zeros();
        for (i, name) in self.names.iter().enumerate() {
            let v = obj
                .get(name)
                .ok_or_else(|| format!("missing score `{name}`"))?
                .as_f64()
                .ok_or_else(|| format!("score `{name}` is not a number"))?;
            if !v.is_finite() {
                return Err(format!("score `{name}` is not finite"));
            }
            out[i] = T::from_f64_lossy(v);
        }
        Ok(out)
    }
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}
