use rand::Rng as _;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng;

/// Number of batches of auxiliary data held per class.
pub const DEFAULT_AUX_BATCHES: usize = 4;

/// Server-side labeled probe data, grouped by class. Never used for training.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    pub groups: Vec<Matrix>,
}

impl AuxiliarySet {
    pub fn num_classes(&self) -> usize {
        self.groups.len()
    }

    pub fn per_class_count(&self) -> Vec<usize> {
        self.groups.iter().map(Matrix::rows).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(Matrix::rows).sum()
    }

    /// Uses every row of an externally supplied labeled set.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        let mut members = vec![Vec::new(); dataset.num_classes];
        for (i, &y) in dataset.labels.iter().enumerate() {
            members[y].push(i);
        }
        Self::from_members(dataset, &members)
    }

    fn from_members(dataset: &Dataset, members: &[Vec<usize>]) -> Result<Self> {
        if let Some(q) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!(
                "class {q} has no auxiliary samples"
            )));
        }
        Ok(AuxiliarySet {
            groups: members
                .iter()
                .map(|m| dataset.features.select_rows(m))
                .collect(),
        })
    }
}

/// Draws `per_class_count` rows of every class with replacement.
pub fn sample_auxiliary(
    dataset: &Dataset,
    per_class_count: usize,
    seed: u64,
) -> Result<AuxiliarySet> {
    if per_class_count == 0 {
        return Err(Error::InvalidArgument(
            "per_class_count must be >= 1".into(),
        ));
    }
    let mut by_class = vec![Vec::new(); dataset.num_classes];
    for (i, &y) in dataset.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    if let Some(q) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!(
            "class {q} has no samples to draw auxiliary data from"
        )));
    }
    let mut rng = rng::stream(seed, &[rng::TAG_AUX]);
    let members: Vec<Vec<usize>> = by_class
        .iter()
        .map(|pool| {
            (0..per_class_count)
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect()
        })
        .collect();
    AuxiliarySet::from_members(dataset, &members)
}
