//! Finite-shot measurement emulation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::random::stream_rng;
use crate::{Error, Result};

/// Seeded multinomial sampler. Not shared across concurrent tasks; give each
/// task its own stream.
#[derive(Debug)]
pub struct ShotSampler {
    seed: u64,
    shots: u64,
    rng: ChaCha8Rng,
}

impl ShotSampler {
    pub fn new(seed: u64, shots: u64) -> Result<Self> {
        Self::with_stream(seed, 0, shots)
    }

    /// Sampler on an independent stream of `seed`.
    pub fn with_stream(seed: u64, stream: u64, shots: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::Config("shot count must be positive".into()));
        }
        Ok(Self { seed, shots, rng: stream_rng(seed, stream) })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Multinomial counts for `probs` with this sampler's shot count.
    pub fn sample_counts(&mut self, probs: &[f64]) -> Result<Vec<u64>> {
        sample_counts_with(probs, self.shots, &mut self.rng)
    }

    /// Multinomial counts for an explicit shot budget.
    pub fn sample_counts_n(&mut self, probs: &[f64], shots: u64) -> Result<Vec<u64>> {
        sample_counts_with(probs, shots, &mut self.rng)
    }

    /// Observed frequencies `counts / shots`.
    pub fn sample_frequencies(&mut self, probs: &[f64]) -> Result<Vec<f64>> {
        let shots = self.shots as f64;
        Ok(self.sample_counts(probs)?.into_iter().map(|c| c as f64 / shots).collect())
    }
}

/// Multinomial sampling by sequential conditional binomials.
pub fn sample_counts_with<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    if probs.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    let mut total = 0.0;
    for &p in probs {
        if !p.is_finite() || p < -1e-9 {
            return Err(Error::InvalidDistribution(format!("entry {p} is negative or non-finite")));
        }
        total += p.max(0.0);
    }
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = total;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts[i] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}
