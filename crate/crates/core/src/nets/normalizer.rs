use lcp_autodiff::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{LcpError, Result};

const EPSILON: f64 = 1e-8;

/// Streaming per-dimension mean and population variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNormalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub clip: f64,
}

impl RunningNormalizer {
    pub fn new(dim: usize, clip: f64) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merges a batch (rows are samples) into the running statistics using
    /// the parallel form of Welford's update.
    pub fn update(&mut self, batch: &Tensor) -> Result<()> {
        if batch.rows() == 0 {
            return Err(LcpError::invalid("normalizer batch", "empty batch"));
        }
        if batch.cols() != self.dim() {
            return Err(LcpError::Dimension {
                what: "normalizer batch",
                expected: self.dim(),
                got: batch.cols(),
            });
        }
        let n = batch.rows() as f64;
        let total = self.count + n;
        for c in 0..self.dim() {
            let batch_mean = (0..batch.rows()).map(|r| batch.get(r, c)).sum::<f64>() / n;
            let batch_m2 = (0..batch.rows())
                .map(|r| (batch.get(r, c) - batch_mean).powi(2))
                .sum::<f64>();
            if self.count == 0.0 {
                self.mean[c] = batch_mean;
                self.var[c] = batch_m2 / n;
                continue;
            }
            let delta = batch_mean - self.mean[c];
            let m2 = self.var[c] * self.count + batch_m2 + delta * delta * self.count * n / total;
            self.mean[c] += delta * n / total;
            self.var[c] = (m2 / total).max(0.0);
        }
        self.count = total;
        Ok(())
    }

    pub fn apply(&self, obs: &Tensor) -> Result<Tensor> {
        if obs.cols() != self.dim() {
            return Err(LcpError::Dimension {
                what: "normalizer input",
                expected: self.dim(),
                got: obs.cols(),
            });
        }
        Ok(Tensor::from_fn(obs.rows(), obs.cols(), |r, c| {
            ((obs.get(r, c) - self.mean[c]) / (self.var[c] + EPSILON).sqrt())
                .clamp(-self.clip, self.clip)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream_normalizes_to_zero() {
        let mut n = RunningNormalizer::new(1, 10.0);
        for _ in 0..5 {
            n.update(&Tensor::column(vec![3.5; 4])).unwrap();
        }
        assert_eq!(n.apply(&Tensor::scalar(3.5)).unwrap().item(), 0.0);
    }

    #[test]
    fn two_point_stream_uses_population_variance() {
        let mut n = RunningNormalizer::new(1, 10.0);
        n.update(&Tensor::scalar(0.0)).unwrap();
        n.update(&Tensor::scalar(2.0)).unwrap();
        assert_eq!(n.mean, vec![1.0]);
        assert_eq!(n.var, vec![1.0]);
    }

    #[test]
    fn far_outliers_are_clipped() {
        let mut n = RunningNormalizer::new(1, 10.0);
        n.update(&Tensor::column(vec![-1.0, 1.0])).unwrap();
        assert_eq!(n.apply(&Tensor::scalar(1e6)).unwrap().item(), 10.0);
        assert_eq!(n.apply(&Tensor::scalar(-1e6)).unwrap().item(), -10.0);
    }

    #[test]
    fn batched_and_streamed_updates_agree() {
        let xs: Vec<f64> = (0..20)
            .map(|i| (i as f64 * 0.7).sin() * 3.0 + 1.0)
            .collect();
        let mut a = RunningNormalizer::new(1, 10.0);
        a.update(&Tensor::column(xs.clone())).unwrap();
        let mut b = RunningNormalizer::new(1, 10.0);
        for chunk in xs.chunks(3) {
            b.update(&Tensor::column(chunk.to_vec())).unwrap();
        }
        assert!((a.mean[0] - b.mean[0]).abs() < 1e-12);
        assert!((a.var[0] - b.var[0]).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut n = RunningNormalizer::new(2, 10.0);
        assert!(n.update(&Tensor::zeros(0, 2)).is_err());
    }
}
