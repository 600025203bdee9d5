//! Per-label Pearson correlation and mean absolute error.

use crate::scores::{LabelSet, Scores, NUM_LABELS, NUM_PERSONALITY};
use crate::{Error, Result, Scalar};

/// Pearson correlation of two equal-length sequences. `None` when either
/// sequence has zero variance.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Option<T> {
    assert_eq!(xs.len(), ys.len(), "pearson inputs differ in length");
    if xs.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return None;
    }
    let r = sxy / (sxx * syy).sqrt();
    Some(r.max(-T::one()).min(T::one()))
}

pub fn mae<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len(), "mae inputs differ in length");
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().zip(ys).map(|(a, b)| (*a - *b).abs()).sum::<T>() / T::from_usize_lossy(xs.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics<T> {
    pub name: String,
    pub pearson: Option<T>,
    pub mae: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub records: usize,
    pub labels: Vec<LabelMetrics<T>>,
    pub personality_pearson: Option<T>,
    pub iri_pearson: Option<T>,
    pub personality_mae: T,
    pub iri_mae: T,
}

fn mean_defined<T: Scalar>(values: impl Iterator<Item = Option<T>>) -> Option<T> {
    let vals: Option<Vec<T>> = values.collect();
    let vals = vals?;
    Some(vals.iter().copied().sum::<T>() / T::from_usize_lossy(vals.len()))
}

/// Metrics of `predicted` against `gold`. Group averages are `None` when any
/// member correlation is undefined.
pub fn evaluate<T: Scalar>(predicted: &[Scores<T>], gold: &[Scores<T>], labels: &LabelSet) -> Result<EvalReport<T>> {
    if predicted.len() != gold.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} gold vectors",
            predicted.len(),
            gold.len()
        )));
    }
    if gold.len() < 2 {
        return Err(Error::Validation(
            "evaluation needs at least 2 records (correlation is undefined)".into(),
        ));
    }
    let per_label: Vec<LabelMetrics<T>> = (0..NUM_LABELS)
        .map(|j| {
            let p: Vec<T> = predicted.iter().map(|s| s[j]).collect();
            let g: Vec<T> = gold.iter().map(|s| s[j]).collect();
            LabelMetrics {
                name: labels.names[j].clone(),
                pearson: pearson(&p, &g),
                mae: mae(&p, &g),
            }
        })
        .collect();
    let (per, iri) = per_label.split_at(NUM_PERSONALITY);
    let avg_mae = |ms: &[LabelMetrics<T>]| ms.iter().map(|m| m.mae).sum::<T>() / T::from_usize_lossy(ms.len());
    Ok(EvalReport {
        records: gold.len(),
        personality_pearson: mean_defined(per.iter().map(|m| m.pearson)),
        iri_pearson: mean_defined(iri.iter().map(|m| m.pearson)),
        personality_mae: avg_mae(per),
        iri_mae: avg_mae(iri),
        labels: per_label,
    })
}
