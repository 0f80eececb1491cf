use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

/// Assignment of trials to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub folds: usize,
    /// `fold_of[trial]`.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// Shuffles the trial indices with the fold stream of `seed` and deals
    /// them round-robin, so fold sizes differ by at most one.
    pub fn new(trials: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 || folds > trials {
            return Err(Error::Config(format!("cannot split {trials} trials into {folds} folds")));
        }
        let mut order: Vec<usize> = (0..trials).collect();
        order.shuffle(&mut stream_rng(seed, stream::FOLDS, 0));
        let mut fold_of = vec![0; trials];
        for (pos, &trial) in order.iter().enumerate() {
            fold_of[trial] = pos % folds;
        }
        Ok(Self { folds, fold_of })
    }

    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&t| self.fold_of[t] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&t| self.fold_of[t] != fold).collect()
    }
}
