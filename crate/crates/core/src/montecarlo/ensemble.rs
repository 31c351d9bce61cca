use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::walk::{stream_rng, Walker};
use crate::error::{Error, Result};
use crate::lattice::LatticePoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub endpoint: LatticePoint,
    /// `sigma_t`, the last time at the origin.
    pub last_visit: f64,
    /// `L_t`, time spent at the origin.
    pub local_time: f64,
    pub weight: f64,
}

/// Weighted sample of the Gibbs measure `P_{beta,t}`. The mean weight
/// estimates `Z_{beta,t}(0)` without bias. Sample weights are `e^{beta L_t}`
/// for free reweighting and likelihood ratios for the renewal sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnsemble {
    pub samples: Vec<PathSample>,
    pub horizon: f64,
    pub beta: f64,
    pub seed: u64,
    pub dim: usize,
    pub ess: f64,
    pub sampler: Sampler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampler {
    /// Free paths weighted by `e^{beta L_t}`.
    FreeReweighting,
    /// Renewal decomposition at the origin, see `sample_gibbs_paths`.
    Renewal,
}

impl WeightedEnsemble {
    pub(super) fn new(samples: Vec<PathSample>, horizon: f64, beta: f64, seed: u64, dim: usize, sampler: Sampler) -> Self {
        let ess = effective_sample_size(samples.iter().map(|s| s.weight));
        Self {
            samples,
            horizon,
            beta,
            seed,
            dim,
            ess,
            sampler,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean weight and its naive standard error.
    pub fn partition_estimate(&self) -> (f64, f64) {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().map(|s| s.weight).sum::<f64>() / n;
        let var = self
            .samples
            .iter()
            .map(|s| (s.weight - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }

    /// Weighted mean of `f` over the samples.
    pub fn expectation<F: Fn(&PathSample) -> f64>(&self, f: F) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for s in &self.samples {
            num += s.weight * f(s);
            den += s.weight;
        }
        num / den
    }
}

/// `(sum w)^2 / sum w^2`, computed after scaling by the largest weight.
pub fn effective_sample_size<I: IntoIterator<Item = f64>>(weights: I) -> f64 {
    let w: Vec<f64> = weights.into_iter().collect();
    let max = w.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return 0.0;
    }
    let (s1, s2) = w
        .iter()
        .fold((0.0, 0.0), |(a, b), &x| (a + x / max, b + (x / max).powi(2)));
    s1 * s1 / s2
}

pub(super) fn validate(t: f64, n: usize, beta: f64, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    Ok(())
}

fn to_sample(w: Walker, weight: f64) -> PathSample {
    PathSample {
        endpoint: LatticePoint::from(w.pos),
        last_visit: w.last_visit,
        local_time: w.local_time,
        weight,
    }
}

/// `n` independent free paths from the origin, weighted by `e^{beta L_t}`.
/// Sample `i` uses stream `i` of `seed`, so the result does not depend on
/// the number of worker threads.
pub fn sample_free_paths(t: f64, n: usize, beta: f64, d: usize, seed: u64) -> Result<WeightedEnsemble> {
    validate(t, n, beta, d)?;
    let samples: Vec<PathSample> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut w = Walker::at_origin(d);
            w.advance(&mut rng, t);
            let weight = (beta * w.local_time).exp();
            to_sample(w, weight)
        })
        .collect();
    Ok(WeightedEnsemble::new(samples, t, beta, seed, d, Sampler::FreeReweighting))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_has_unit_weights() {
        let e = sample_free_paths(5.0, 500, 0.0, 3, 1).unwrap();
        assert!(e.samples.iter().all(|s| s.weight == 1.0));
        assert_eq!(e.ess, 500.0);
        for s in &e.samples {
            assert!(s.local_time > 0.0 && s.local_time <= 5.0);
            assert!(s.last_visit >= 0.0 && s.last_visit <= 5.0);
            assert!(s.weight >= 1.0);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sample_free_paths(0.0, 5, 1.0, 3, 0).is_err());
        assert!(sample_free_paths(1.0, 0, 1.0, 3, 0).is_err());
        assert!(sample_free_paths(1.0, 5, -1.0, 3, 0).is_err());
    }

    #[test]
    fn ess_of_equal_and_degenerate_weights() {
        assert_eq!(effective_sample_size([2.0; 10]), 10.0);
        assert!((effective_sample_size([1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_horizon_partition_function() {
        // d=1, t=1: Z = E e^{beta L_1} against the Volterra solve.
        let beta = 1.5;
        let e = sample_free_paths(1.0, 100_000, beta, 1, 9).unwrap();
        let (z, se) = e.partition_estimate();
        let grid = crate::lattice::TimeGrid::new(1.0, 0.001).unwrap();
        let k = crate::kernel::solve_pinned_diag(beta, &grid, 1).unwrap();
        let exact = k.partition_curve().last();
        assert!((z - exact).abs() < 4.0 * se, "{z} {se} {exact}");
    }
}
