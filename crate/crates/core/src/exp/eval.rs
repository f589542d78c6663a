use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::MlpModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Accuracy over test rows of minority classes; equals `accuracy` when
    /// there is no minority class.
    pub minority_accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Classes whose training count is strictly below the mean class count.
pub fn minority_classes(train_counts: &[usize]) -> Vec<bool> {
    let q = train_counts.len().max(1) as f64;
    let mean = train_counts.iter().sum::<usize>() as f64 / q;
    train_counts.iter().map(|&n| (n as f64) < mean).collect()
}

pub fn evaluate(model: &MlpModel, test: &Dataset, minority: &[bool]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let q = test.num_classes;
    if minority.len() != q {
        return Err(Error::Shape(format!(
            "minority mask has {} entries for {q} classes",
            minority.len()
        )));
    }
    let predictions = model.predict(&test.features)?;
    evaluate_predictions(&predictions, &test.labels, q, minority)
}

pub fn evaluate_predictions(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
    minority: &[bool],
) -> Result<Evaluation> {
    if labels.is_empty() || predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "need one prediction per test label".into(),
        ));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&y, &p) in labels.iter().zip(predictions) {
        if y >= num_classes || p >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y.max(p),
                num_classes,
            });
        }
        confusion[y][p] += 1;
    }
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: usize = row.iter().sum();
            (n > 0).then(|| row[c] as f64 / n as f64)
        })
        .collect();
    let accuracy = correct as f64 / labels.len() as f64;
    let (m_correct, m_total) = (0..num_classes)
        .filter(|&c| minority[c])
        .fold((0usize, 0usize), |(ok, n), c| {
            (ok + confusion[c][c], n + confusion[c].iter().sum::<usize>())
        });
    let minority_accuracy = if m_total == 0 {
        accuracy
    } else {
        m_correct as f64 / m_total as f64
    };
    Ok(Evaluation {
        accuracy,
        per_class_accuracy,
        minority_accuracy,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let y = vec![0, 1, 1, 0, 1];
        let e = evaluate_predictions(&y, &y, 2, &[false, true]).unwrap();
        assert_eq!((e.accuracy, e.minority_accuracy), (1.0, 1.0));
    }

    #[test]
    fn majority_predictor_on_imbalanced_labels() {
        // 838 negatives, 162 positives.
        let labels: Vec<usize> = (0..1000).map(|i| usize::from(i < 162)).collect();
        let minority = minority_classes(&[838, 162]);
        assert_eq!(minority, vec![false, true]);
        let e = evaluate_predictions(&vec![0; 1000], &labels, 2, &minority).unwrap();
        assert!((e.accuracy - 0.838).abs() < 1e-12);
        assert_eq!(e.minority_accuracy, 0.0);
        let row_sums: Vec<usize> = e.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums, vec![838, 162]);
        assert_eq!(e.per_class_accuracy, vec![Some(1.0), Some(0.0)]);
    }

    #[test]
    fn balanced_training_has_no_minority() {
        assert_eq!(minority_classes(&[5, 5, 5]), vec![false; 3]);
        let e = evaluate_predictions(&[0, 2], &[0, 1], 3, &[false; 3]).unwrap();
        assert_eq!(e.minority_accuracy, e.accuracy);
        assert_eq!(e.per_class_accuracy[2], None);
    }

    #[test]
    fn empty_test_set_fails() {
        assert!(evaluate_predictions(&[], &[], 2, &[false, false]).is_err());
    }
}
