use super::ClientDataset;
use crate::error::{Error, Result};

/// The rows a client trains on in one round, in arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSlice {
    pub indices: Vec<usize>,
}

impl TrainingSlice {
    pub fn whole(client: &ClientDataset) -> Self {
        TrainingSlice {
            indices: client.dataset.time_order.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn class_counts(&self, client: &ClientDataset) -> Vec<usize> {
        super::histogram(
            self.indices.iter().map(|&i| client.dataset.labels[i]),
            client.dataset.num_classes,
        )
    }
}

/// The latest `n_latest` arrivals as of `round` (1-based). The client has
/// seen `n_latest + (round − 1)·advance` samples by then, clamped to its
/// total, so the window slides forward `advance` samples per round and then
/// rests on the newest data.
pub fn window_latest(
    client: &ClientDataset,
    n_latest: usize,
    advance: usize,
    round: usize,
) -> Result<TrainingSlice> {
    if n_latest == 0 {
        return Err(Error::InvalidArgument("n_latest must be >= 1".into()));
    }
    let total = client.total_count();
    let arrived = n_latest
        .saturating_add(round.saturating_sub(1).saturating_mul(advance))
        .min(total);
    let start = arrived.saturating_sub(n_latest);
    Ok(TrainingSlice {
        indices: client.dataset.time_order[start..arrived].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::nn::Matrix;

    fn client(labels: Vec<usize>) -> ClientDataset {
        let n = labels.len();
        let d = Dataset::new(Matrix::zeros(n, 1), labels, 2, (0..n).collect()).unwrap();
        ClientDataset {
            client_id: 0,
            dataset: d,
            source_indices: (0..n).collect(),
        }
    }

    #[test]
    fn large_window_is_whole_dataset() {
        let c = client(vec![0, 1, 0, 1, 1]);
        for round in 1..5 {
            let s = window_latest(&c, 10, 3, round).unwrap();
            assert_eq!(s.indices, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn slices_are_contiguous_suffixes_of_arrivals() {
        let c = client(vec![0; 40]);
        for round in 1..20 {
            let s = window_latest(&c, 20, 3, round).unwrap();
            assert_eq!(s.len(), 20);
            let end = (20 + (round - 1) * 3).min(40);
            assert_eq!(s.indices, (end - 20..end).collect::<Vec<_>>());
        }
        assert!(window_latest(&c, 0, 1, 1).is_err());
    }

    #[test]
    fn burst_raises_then_lowers_class_share() {
        // Arrivals: 20 of class 0, a burst of 10 of class 1, then 20 of class 0.
        let labels: Vec<usize> = [vec![0; 20], vec![1; 10], vec![0; 20]].concat();
        let c = client(labels);
        let share: Vec<f64> = (1..=7)
            .map(|r| {
                let s = window_latest(&c, 10, 5, r).unwrap();
                s.class_counts(&c)[1] as f64 / s.len() as f64
            })
            .collect();
        // Windows end at 10, 15, 20, 25, 30, 35, 40.
        assert_eq!(share, vec![0.0, 0.0, 0.0, 0.5, 1.0, 0.5, 0.0]);
    }
}
