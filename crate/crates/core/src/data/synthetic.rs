use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Geometric, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng;

/// Isotropic Gaussian clusters, one per class, with bursty arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub means: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    /// Mean length of a same-class arrival run; 1 gives a uniform shuffle.
    pub run_length: f64,
}

impl SyntheticSpec {
    /// Class means drawn as Gaussian vectors of expected norm `separation`.
    pub fn clustered(
        feature_dim: usize,
        counts: Vec<usize>,
        separation: f64,
        scale: f64,
        run_length: f64,
        seed: u64,
    ) -> Self {
        let num_classes = counts.len();
        let mut rng = rng::stream(seed, &[rng::TAG_SYNTH, 0]);
        let per_dim = separation / (feature_dim.max(1) as f64).sqrt();
        let means = (0..num_classes)
            .map(|_| {
                (0..feature_dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        per_dim * z
                    })
                    .collect::<Vec<f64>>()
            })
            .collect();
        SyntheticSpec {
            num_classes,
            feature_dim,
            means,
            scales: vec![scale; num_classes],
            counts,
            run_length,
        }
    }

    pub fn with_counts(&self, counts: Vec<usize>) -> Self {
        SyntheticSpec {
            counts,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.num_classes;
        if q == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidArgument(
                "synthetic data needs Q >= 1 and feature_dim >= 1".into(),
            ));
        }
        if self.means.len() != q || self.scales.len() != q || self.counts.len() != q {
            return Err(Error::InvalidArgument(format!(
                "synthetic spec needs {q} means, scales and counts"
            )));
        }
        if self.means.iter().any(|m| m.len() != self.feature_dim) {
            return Err(Error::InvalidArgument(
                "mean vector width != feature_dim".into(),
            ));
        }
        if self.scales.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("cluster scales must be >= 0".into()));
        }
        if !(self.run_length >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "run_length {} < 1",
                self.run_length
            )));
        }
        if self.counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidArgument(
                "synthetic spec has zero samples".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `counts[q]` points from `N(mean_q, scale_q² I)` for every class and
/// an arrival order made of geometric same-class runs.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(seed, &[rng::TAG_SYNTH, 1]);
    let total: usize = spec.counts.iter().sum();
    let d = spec.feature_dim;
    let mut data = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    for (q, &count) in spec.counts.iter().enumerate() {
        let noise =
            Normal::new(0.0, spec.scales[q]).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for _ in 0..count {
            data.extend(spec.means[q].iter().map(|m| m + noise.sample(&mut rng)));
            labels.push(q);
        }
    }
    let features = Matrix::from_vec(total, d, data)?;

    // Arrival order: repeatedly pick a class with probability proportional to
    // its remaining samples and emit a geometric run of it.
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); spec.num_classes];
    for (i, &y) in labels.iter().enumerate() {
        pools[y].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }
    let run =
        Geometric::new(1.0 / spec.run_length).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut remaining = total;
    let mut time_order = Vec::with_capacity(total);
    while remaining > 0 {
        let mut pick = rng.random_range(0..remaining);
        let class = pools
            .iter()
            .position(|p| {
                if pick < p.len() {
                    true
                } else {
                    pick -= p.len();
                    false
                }
            })
            .expect("pick < remaining");
        let len = (run.sample(&mut rng) as usize)
            .saturating_add(1)
            .min(pools[class].len());
        for _ in 0..len {
            time_order.push(pools[class].pop().unwrap());
        }
        remaining -= len;
    }
    Dataset::new(features, labels, spec.num_classes, time_order)
}
