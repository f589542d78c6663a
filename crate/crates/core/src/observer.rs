//! Autoregressive tracking of the global class ratio and the loss weights
//! derived from it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{effective_number_weight, LossSpec};

pub const DEFAULT_DROP_THRESHOLD: f64 = 0.5;
const HISTORY_CAP: usize = 64;
const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioObserverState {
    pub ratio: Vec<f64>,
    pub round_count: usize,
    pub gain: f64,
    pub drop_threshold: f64,
    /// Most recent observations, oldest first.
    pub history: VecDeque<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropDecision {
    pub dropped: bool,
    pub similarity: f64,
}

fn check_probability(r: &[f64], q: usize) -> Result<()> {
    if r.len() != q {
        return Err(Error::InvalidArgument(format!(
            "ratio has {} entries, expected {q}",
            r.len()
        )));
    }
    let sum: f64 = r.iter().sum();
    if r.iter().any(|&v| !(v >= -PROB_TOL) || !v.is_finite()) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "{r:?} is not a probability vector"
        )));
    }
    Ok(())
}

impl RatioObserverState {
    /// Uniform `1/Q` start.
    pub fn new(num_classes: usize, gain: f64, drop_threshold: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "observer needs Q >= 2, got {num_classes}"
            )));
        }
        Self::check_gain(gain)?;
        if !(-1.0..=1.0).contains(&drop_threshold) {
            return Err(Error::InvalidArgument(format!(
                "drop threshold {drop_threshold} not in [-1, 1]"
            )));
        }
        Ok(RatioObserverState {
            ratio: vec![1.0 / num_classes as f64; num_classes],
            round_count: 0,
            gain,
            drop_threshold,
            history: VecDeque::new(),
        })
    }

    fn check_gain(gain: f64) -> Result<()> {
        if !(gain > 0.0 && gain <= 1.0) {
            return Err(Error::InvalidArgument(format!("gain {gain} not in (0, 1]")));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.ratio.len()
    }

    pub fn update(&mut self, observation: &[f64]) -> Result<()> {
        self.update_with_gain(observation, self.gain)
    }

    /// The first observation is adopted verbatim. Later ones are blended as
    /// `(1−η)/2 · R̂ + η/2 · R` and the result renormalized to sum to one.
    pub fn update_with_gain(&mut self, observation: &[f64], gain: f64) -> Result<()> {
        check_probability(observation, self.num_classes())?;
        Self::check_gain(gain)?;
        if self.round_count == 0 {
            self.ratio = observation.to_vec();
        } else {
            let (keep, take) = ((1.0 - gain) / 2.0, gain / 2.0);
            let blended: Vec<f64> = self
                .ratio
                .iter()
                .zip(observation)
                .map(|(&old, &new)| keep * old + take * new)
                .collect();
            let sum: f64 = blended.iter().sum();
            self.ratio = blended.iter().map(|v| (v / sum).max(0.0)).collect();
        }
        self.round_count += 1;
        if self.history.len() == HISTORY_CAP {
            self.history.pop_front();
        }
        self.history.push_back(observation.to_vec());
        Ok(())
    }

    /// Flags an observation whose cosine to the current estimate is below the
    /// drop threshold. Before the first observation nothing is dropped.
    pub fn mismatch_check(&self, observation: &[f64]) -> Result<DropDecision> {
        let similarity = cosine_similarity(observation, &self.ratio)?;
        let dropped = self.round_count >= 1 && similarity < self.drop_threshold;
        Ok(DropDecision {
            dropped,
            similarity,
        })
    }

    pub fn loss_spec(&self, n_ref: f64, beta: f64) -> Result<LossSpec> {
        let (per_class_n, normalizer) = balanced_parts(&self.ratio, n_ref, beta)?;
        Ok(LossSpec::ClassBalanced {
            beta,
            per_class_n,
            normalizer,
        })
    }
}

/// Class sizes `max(1, round(N_ref·R̂_q))` and the `R̂`-weighted mean of
/// their raw effective-number weights.
fn balanced_parts(ratio: &[f64], n_ref: f64, beta: f64) -> Result<(Vec<f64>, f64)> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta {beta} not in [0, 1)")));
    }
    if !(n_ref >= ratio.len() as f64) {
        return Err(Error::InvalidArgument(format!(
            "N_ref {n_ref} smaller than Q = {}",
            ratio.len()
        )));
    }
    check_probability(ratio, ratio.len())?;
    let sizes: Vec<f64> = ratio.iter().map(|r| (n_ref * r).round().max(1.0)).collect();
    let mean = sizes
        .iter()
        .zip(ratio)
        .map(|(&n, r)| effective_number_weight(beta, n) * r)
        .sum();
    Ok((sizes, mean))
}

/// Effective-number weights for the class sizes `max(1, round(N_ref·R̂_q))`,
/// rescaled so that their `R̂`-weighted mean is one.
pub fn balanced_weights(ratio: &[f64], n_ref: f64, beta: f64) -> Result<Vec<f64>> {
    let (sizes, mean) = balanced_parts(ratio, n_ref, beta)?;
    Ok(sizes
        .iter()
        .map(|&n| effective_number_weight(beta, n) / mean)
        .collect())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument(
            "cosine similarity of a zero vector".into(),
        ));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Plain running mean of all observations, for comparison.
#[derive(Debug, Clone)]
pub struct RunningAverage {
    pub ratio: Vec<f64>,
    pub count: usize,
}

impl RunningAverage {
    pub fn new(num_classes: usize) -> Self {
        RunningAverage {
            ratio: vec![1.0 / num_classes as f64; num_classes],
            count: 0,
        }
    }

    pub fn update(&mut self, observation: &[f64]) {
        self.count += 1;
        let j = self.count as f64;
        for (r, o) in self.ratio.iter_mut().zip(observation) {
            *r = (j - 1.0) / j * *r + o / j;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_uniform() {
        let s = RatioObserverState::new(10, 0.3, 0.5).unwrap();
        assert!(s.ratio.iter().all(|&r| (r - 0.1).abs() < 1e-15));
        assert_eq!(s.round_count, 0);
        assert_eq!(
            RatioObserverState::new(2, 0.3, 0.5).unwrap().ratio,
            vec![0.5, 0.5]
        );
        assert!(RatioObserverState::new(1, 0.3, 0.5).is_err());
        assert!(RatioObserverState::new(3, 0.0, 0.5).is_err());
    }

    #[test]
    fn first_observation_is_adopted() {
        let mut s = RatioObserverState::new(2, 0.3, 0.5).unwrap();
        s.update(&[0.7, 0.3]).unwrap();
        assert_eq!(s.ratio, vec![0.7, 0.3]);
        assert_eq!(s.round_count, 1);
    }

    #[test]
    fn blended_update_matches_hand_evaluation() {
        let mut s = RatioObserverState::new(2, 0.3, 0.5).unwrap();
        s.update(&[0.5, 0.5]).unwrap();
        s.update(&[0.9, 0.1]).unwrap();
        // raw [0.31, 0.19] → [0.62, 0.38]
        assert!((s.ratio[0] - 0.62).abs() < 1e-12 && (s.ratio[1] - 0.38).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_probability_observations() {
        let mut s = RatioObserverState::new(3, 0.3, 0.5).unwrap();
        assert!(s.update(&[0.5, 0.5]).is_err());
        assert!(s.update(&[0.5, 0.6, 0.1]).is_err());
    }

    #[test]
    fn mismatch_rules() {
        let mut s = RatioObserverState::new(2, 0.3, 0.5).unwrap();
        // Never drops before the first observation.
        assert!(!s.mismatch_check(&[1.0, 0.0]).unwrap().dropped);
        s.update(&[1.0, 0.0]).unwrap();
        let same = s.mismatch_check(&[1.0, 0.0]).unwrap();
        assert_eq!((same.dropped, same.similarity), (false, 1.0));
        let orth = s.mismatch_check(&[0.0, 1.0]).unwrap();
        assert!(orth.dropped && orth.similarity == 0.0);
        s.drop_threshold = 0.0;
        assert!(!s.mismatch_check(&[0.0, 1.0]).unwrap().dropped);
    }

    #[test]
    fn balanced_weight_cases() {
        let w = balanced_weights(&[0.2, 0.3, 0.5], 100.0, 0.0).unwrap();
        assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let w = balanced_weights(&[0.25; 4], 100.0, 0.99).unwrap();
        assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let w = balanced_weights(&[0.162, 0.838], 1000.0, 0.999).unwrap();
        assert!(w[0] > w[1]);
        let mean: f64 = w[0] * 0.162 + w[1] * 0.838;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(balanced_weights(&[0.5, 0.5], 100.0, 1.0).is_err());
        assert!(balanced_weights(&[0.5, 0.5], 1.0, 0.5).is_err());
    }

    #[test]
    fn loss_spec_reproduces_balanced_weights() {
        let mut s = RatioObserverState::new(3, 0.3, 0.5).unwrap();
        s.update(&[0.1, 0.3, 0.6]).unwrap();
        let spec = s.loss_spec(500.0, 0.999).unwrap();
        let w = balanced_weights(&s.ratio, 500.0, 0.999).unwrap();
        for (q, wq) in w.iter().enumerate() {
            assert!((spec.class_weight(q) - wq).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[0.31, 0.19], &[0.62, 0.38]).unwrap() - 1.0).abs() < 1e-15);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }
}
