//! Hashed bag-of-words features.
//!
//! Text is lowercased and split on runs of non-alphanumeric characters. Each
//! token's UTF-8 bytes are hashed with 64-bit FNV-1a (offset basis
//! `0xcbf29ce484222325`, prime `0x100000001b3`) and the slot is
//! `hash mod feature_dim`; the slot value is the token count. A constant 1.0
//! bias sits at index `feature_dim`, one past the hashed slots.

use std::collections::BTreeMap;

use crate::{Error, Result, Scalar};

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
pub const DEFAULT_FEATURE_DIM: usize = 1 << 18;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET_BASIS, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn check_feature_dim(dim: usize) -> Result<()> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Config(format!("feature_dim must be a power of two, got {dim}")));
    }
    Ok(())
}

/// Sparse vector with strictly increasing indices; length is `dim + 1` (bias included).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatures<T> {
    pub dim: usize,
    pub entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseFeatures<T> {
    pub fn bias_index(&self) -> usize {
        self.dim
    }

    pub fn get(&self, index: usize) -> T {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(T::zero(), |pos| self.entries[pos].1)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn featurize<T: Scalar>(text: &str, feature_dim: usize) -> Result<SparseFeatures<T>> {
    check_feature_dim(feature_dim)?;
    let mask = (feature_dim - 1) as u64;
    let mut counts: BTreeMap<usize, T> = BTreeMap::new();
    for token in tokenize(text) {
        let slot = (fnv1a64(token.as_bytes()) & mask) as usize;
        let count = counts.entry(slot).or_insert_with(T::zero);
        *count = *count + T::one();
    }
    let mut entries: Vec<(usize, T)> = counts.into_iter().collect();
    entries.push((feature_dim, T::one()));
    Ok(SparseFeatures {
        dim: feature_dim,
        entries,
    })
}
