//! Deterministic k-fold assignment.
//!
//! Ids are sorted, shuffled with SplitMix64 seeded by `seed`, then dealt
//! round-robin, so the split depends only on the id set, `k` and the seed.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::rng::SplitMix64;

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FoldError {
    #[error("cannot split {samples} samples into {k} folds")]
    TooManyFolds { k: usize, samples: usize },
    #[error("k must be at least 1")]
    ZeroFolds,
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    /// Sample id to fold index in `0..k`.
    pub assignment: BTreeMap<String, usize>,
}

impl FoldSplit {
    /// Validation ids of fold `fold`, sorted.
    pub fn validation(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Training ids of fold `fold` (everything not validated on), sorted.
    pub fn training(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn kfold<S: AsRef<str>>(ids: &[S], k: usize, seed: u64) -> Result<FoldSplit, FoldError> {
    if k == 0 {
        return Err(FoldError::ZeroFolds);
    }
    if k > ids.len() {
        return Err(FoldError::TooManyFolds { k, samples: ids.len() });
    }
    let mut sorted: Vec<&str> = ids.iter().map(AsRef::as_ref).collect();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(FoldError::DuplicateId(w[0].to_string()));
    }
    SplitMix64::new(seed).shuffle(&mut sorted);
    let assignment = sorted
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.to_string(), i % k))
        .collect();
    Ok(FoldSplit { k, seed, assignment })
}
