//! Labeled datasets, client partitions, and the server's auxiliary probe set.

mod auxiliary;
mod idx;
mod partition;
mod synthetic;
mod window;

pub use auxiliary::{sample_auxiliary, AuxiliarySet, DEFAULT_AUX_BATCHES};
pub use idx::{
    load_idx, quantize_jointly, quantize_unit, read_idx_images, read_idx_labels, write_idx,
};
pub use partition::shard_partition;
pub use synthetic::{gen_synthetic, SyntheticSpec};
pub use window::{window_latest, TrainingSlice};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// `time_order[t]` is the row that arrives at time `t`.
    pub time_order: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        time_order: Vec<usize>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        let mut seen = vec![false; labels.len()];
        for &i in &time_order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(
                    "time_order is not a permutation".into(),
                ));
            }
        }
        if time_order.len() != labels.len() {
            return Err(Error::InvalidArgument(
                "time_order is not a permutation".into(),
            ));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            time_order,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Per-class histogram of length `num_classes`.
    pub fn class_counts(&self) -> Vec<usize> {
        histogram(self.labels.iter().copied(), self.num_classes)
    }

    /// Rows `indices`, keeping their relative arrival order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut rank = vec![usize::MAX; self.len()];
        for (t, &i) in self.time_order.iter().enumerate() {
            rank[i] = t;
        }
        let mut order: Vec<usize> = (0..indices.len()).collect();
        order.sort_by_key(|&k| rank[indices[k]]);
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            time_order: order,
        }
    }
}

pub fn histogram(labels: impl IntoIterator<Item = usize>, num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for y in labels {
        counts[y] += 1;
    }
    counts
}

/// One client's private data. Only `total_count` ever leaves the client.
#[derive(Debug, Clone)]
pub struct ClientDataset {
    pub client_id: usize,
    pub dataset: Dataset,
    /// Row indices into the partitioned source dataset.
    pub source_indices: Vec<usize>,
}

impl ClientDataset {
    pub fn total_count(&self) -> usize {
        self.dataset.len()
    }
}
