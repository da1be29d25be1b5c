//! Random input/weight patterns for NF statistics and dataset generation.

use crate::error::{check_range, Result};
use crate::rng::{bernoulli, stream, Purpose};
use alloc::vec::Vec;

/// Independent Bernoulli bits for inputs and weights.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WorkloadSampler {
    /// Probability that an input bit is 1.
    pub p_input: f64,
    /// Probability that a weight bit is 1.
    pub p_weight: f64,
}

impl Default for WorkloadSampler {
    fn default() -> Self {
        Self::bernoulli(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub inputs: Vec<bool>,
    /// Row-major.
    pub weights: Vec<bool>,
}

impl WorkloadSampler {
    pub fn bernoulli(p: f64) -> Self {
        Self { p_input: p, p_weight: p }
    }

    /// Sparse activations, as produced by ReLU layers; weights stay balanced.
    pub fn sparse(p_input: f64) -> Self {
        Self { p_input, p_weight: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("sampler.p_input", self.p_input, 0.0, 1.0)?;
        check_range("sampler.p_weight", self.p_weight, 0.0, 1.0)?;
        Ok(())
    }

    /// Pattern `index` of the stream keyed by `seed`.
    pub fn sample(&self, rows: usize, cols: usize, seed: u64, index: u64) -> Pattern {
        let mut rng = stream(seed, Purpose::Workload, index);
        let inputs = (0..rows).map(|_| bernoulli(&mut rng, self.p_input)).collect();
        let weights = (0..rows * cols).map(|_| bernoulli(&mut rng, self.p_weight)).collect();
        Pattern { inputs, weights }
    }
}

/// FNV-1a digest of a column's input and weight bits.
pub fn column_digest(inputs: &[bool], weights: &[bool], cols: usize, col: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, &x) in inputs.iter().enumerate() {
        let byte = (x as u8) | ((weights[i * cols + col] as u8) << 1);
        h ^= byte as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_rate_respected() {
        let s = WorkloadSampler::bernoulli(0.25);
        assert_eq!(s.sample(64, 64, 3, 9), s.sample(64, 64, 3, 9));
        assert_ne!(s.sample(64, 64, 3, 9), s.sample(64, 64, 3, 10));
        let p = s.sample(64, 64, 1, 0);
        let ones = p.weights.iter().filter(|&&w| w).count() as f64 / 4096.0;
        assert!((ones - 0.25).abs() < 0.05);
        assert!(WorkloadSampler::bernoulli(1.5).validate().is_err());
    }
}
