//! Punctuation-insertion augmentation.
//!
//! Each augmented copy of an essay gets `k` marks inserted, with `k` drawn
//! uniformly from `1..=max(1, ceil(max_rate * len))` where `len` counts
//! Unicode scalar values. Every insertion goes directly after a uniformly
//! chosen character of the text as it stands at that point, so the original
//! essay is always a subsequence of the result and nothing is inserted in
//! front of the first character.

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::EssayRecord;
use crate::rng::record_rng;
use crate::{Error, Result};

pub const DEFAULT_MARKS: [char; 5] = [',', '.', '!', '\'', '?'];
/// The six-mark set used by the original AEDA method.
pub const AEDA_MARKS: [char; 6] = ['.', ';', '?', ':', '!', ','];
pub const DEFAULT_COPIES: u32 = 20;
pub const DEFAULT_MAX_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub marks: Vec<char>,
    pub copies: u32,
    pub max_rate: f64,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            marks: DEFAULT_MARKS.to_vec(),
            copies: DEFAULT_COPIES,
            max_rate: DEFAULT_MAX_RATE,
            seed: 0,
        }
    }
}

impl AugmentationConfig {
    pub fn aeda() -> Self {
        AugmentationConfig {
            marks: AEDA_MARKS.to_vec(),
            ..Default::default()
        }
    }

    /// Parses a mark list given as strings, each of which must be exactly one character.
    pub fn marks_from_strings<S: AsRef<str>>(marks: &[S]) -> Result<Vec<char>> {
        marks
            .iter()
            .map(|s| {
                let mut chars = s.as_ref().chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(Error::Config(format!(
                        "punctuation mark {:?} must be exactly one character",
                        s.as_ref()
                    ))),
                }
            })
            .collect()
    }

    pub fn validate_marks(&self) -> Result<()> {
        if self.marks.is_empty() {
            return Err(Error::Config("punctuation mark set is empty".into()));
        }
        for (i, m) in self.marks.iter().enumerate() {
            if self.marks[..i].contains(m) {
                return Err(Error::Config(format!("duplicate punctuation mark {m:?}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_marks()?;
        if self.copies == 0 {
            return Err(Error::Config("augmentation copies must be positive".into()));
        }
        if !(self.max_rate > 0.0 && self.max_rate <= 1.0) {
            return Err(Error::Config(format!(
                "augmentation max_rate must be in (0, 1], got {}",
                self.max_rate
            )));
        }
        Ok(())
    }

    /// Upper bound on insertions for a text of `len` characters.
    pub fn max_insertions(&self, len: usize) -> usize {
        ((self.max_rate * len as f64).ceil() as usize).max(1)
    }
}

/// Inserts exactly `k` marks, each after a uniformly chosen character.
pub fn insert_marks<R: Rng + ?Sized>(text: &str, marks: &[char], k: usize, rng: &mut R) -> Result<String> {
    if text.is_empty() {
        return Err(Error::Validation("cannot augment empty text".into()));
    }
    if marks.is_empty() {
        return Err(Error::Config("punctuation mark set is empty".into()));
    }
    let mut chars: Vec<char> = text.chars().collect();
    chars.reserve(k);
    for _ in 0..k {
        let after = rng.random_range(0..chars.len());
        let mark = *marks.choose(rng).expect("marks non-empty");
        chars.insert(after + 1, mark);
    }
    Ok(chars.into_iter().collect())
}

/// One augmented variant of `text` with at least one inserted mark.
pub fn augment_once<R: Rng + ?Sized>(text: &str, cfg: &AugmentationConfig, rng: &mut R) -> Result<String> {
    if text.is_empty() {
        return Err(Error::Validation("cannot augment empty text".into()));
    }
    cfg.validate_marks()?;
    let len = text.chars().count();
    let k = rng.random_range(1..=cfg.max_insertions(len));
    insert_marks(text, &cfg.marks, k, rng)
}

/// Suffix appended to the source id to name augmented copy `copy` (1-based).
pub fn copy_id(source_id: &str, copy: u32) -> String {
    format!("{source_id}#aug{copy}")
}

/// `cfg.copies` augmented copies of `record`, sharing its profile and gold labels.
pub fn augment_record(record: &EssayRecord, cfg: &AugmentationConfig) -> Result<Vec<EssayRecord>> {
    cfg.validate()?;
    if record.essay.is_empty() {
        return Err(Error::Validation(format!("record `{}` has an empty essay", record.id)));
    }
    (1..=cfg.copies)
        .map(|j| {
            let mut rng = record_rng(cfg.seed, &record.id, u64::from(j));
            let essay = augment_once(&record.essay, cfg, &mut rng)?;
            Ok(EssayRecord {
                id: copy_id(&record.id, j),
                essay,
                profile: record.profile.clone(),
                gold: record.gold,
                origin: Some(record.origin.clone().unwrap_or_else(|| record.id.clone())),
            })
        })
        .collect()
}

/// Originals first (unchanged, in input order), then every record's copies in input order.
pub fn augment_corpus(records: &[EssayRecord], cfg: &AugmentationConfig) -> Result<Vec<EssayRecord>> {
    cfg.validate()?;
    let copies: Vec<Vec<EssayRecord>> = records
        .par_iter()
        .map(|r| {
            augment_record(r, cfg).map_err(|e| Error::Record {
                id: r.id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(records.len() * (1 + cfg.copies as usize));
    out.extend(records.iter().cloned());
    out.extend(copies.into_iter().flatten());
    Ok(out)
}
