//! Bit counting under continual observation with the binary (dyadic tree)
//! mechanism.
//!
//! Round `t` closes the dyadic node at level `trailing_zeros(t)`; the
//! released prefix sum adds the noisy nodes selected by the set bits of `t`.
//! A bit lands in one node per level, so with `L = ceil(log2 T) + 1` levels
//! and per-node scale `L / epsilon` the whole stream is `epsilon`-DP.

use crate::error::{Error, Result};
use crate::noise::{sample_laplace, LaplaceScale, RandomSource};

/// `ceil(log2(horizon))` for `horizon >= 1`.
pub fn ceil_log2(horizon: usize) -> usize {
    if horizon <= 1 {
        0
    } else {
        (usize::BITS - (horizon - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone)]
pub struct PrivateCounter {
    horizon: usize,
    epsilon: f64,
    scale: LaplaceScale,
    src: RandomSource,
    rounds: usize,
    exact_nodes: Vec<u64>,
    noisy_nodes: Vec<f64>,
    true_count: u64,
    last_estimate: u64,
    max_abs_noise: f64,
    max_error: u64,
}

impl PrivateCounter {
    pub fn new(horizon: usize, epsilon: f64, src: RandomSource) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("counter horizon must be at least 1"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!(
                "counter epsilon must be positive, got {epsilon}"
            )));
        }
        let levels = ceil_log2(horizon) + 1;
        let scale = LaplaceScale::new(levels as f64 / epsilon)?;
        Ok(Self {
            horizon,
            epsilon,
            scale,
            src,
            rounds: 0,
            exact_nodes: vec![0; levels],
            noisy_nodes: vec![0.0; levels],
            true_count: 0,
            last_estimate: 0,
            max_abs_noise: 0.0,
            max_error: 0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of tree levels, `ceil(log2 T) + 1`.
    pub fn levels(&self) -> usize {
        self.exact_nodes.len()
    }

    /// Per-node Laplace scale.
    pub fn noise_scale(&self) -> f64 {
        self.scale.gamma()
    }

    pub fn rounds_consumed(&self) -> usize {
        self.rounds
    }

    pub fn is_exhausted(&self) -> bool {
        self.rounds >= self.horizon
    }

    fn node_noise(&self, level: usize, index: usize) -> f64 {
        let key = ((level as u64) << 48) | index as u64;
        sample_laplace(&mut self.src.fork(key), self.scale)
    }

    /// Feeds one bit and returns the released estimate of the running sum.
    pub fn feed(&mut self, bit: bool) -> Result<u64> {
        if self.is_exhausted() {
            return Err(Error::state(format!(
                "counter horizon {} exhausted",
                self.horizon
            )));
        }
        self.rounds += 1;
        let t = self.rounds;
        self.true_count += bit as u64;

        let level = t.trailing_zeros() as usize;
        let mut closed = bit as u64;
        for j in 0..level {
            closed += self.exact_nodes[j];
            self.exact_nodes[j] = 0;
            self.noisy_nodes[j] = 0.0;
        }
        let noise = self.node_noise(level, t >> level);
        self.max_abs_noise = self.max_abs_noise.max(noise.abs());
        self.exact_nodes[level] = closed;
        self.noisy_nodes[level] = closed as f64 + noise;

        let noisy_sum: f64 = (0..self.levels())
            .filter(|&j| (t >> j) & 1 == 1)
            .map(|j| self.noisy_nodes[j])
            .sum();
        let estimate = noisy_sum.round().clamp(0.0, t as f64) as u64;
        self.last_estimate = estimate;
        self.max_error = self.max_error.max(estimate.abs_diff(self.true_count));
        Ok(estimate)
    }

    /// Last released estimate (0 before the first feed).
    pub fn estimate(&self) -> u64 {
        self.last_estimate
    }

    /// Exact running sum. Instrumentation only; never released.
    pub fn true_count(&self) -> u64 {
        self.true_count
    }

    /// Largest `|estimate - true prefix sum|` over the rounds so far.
    pub fn max_error(&self) -> u64 {
        self.max_error
    }

    /// Largest absolute node noise drawn so far.
    pub fn max_abs_noise(&self) -> f64 {
        self.max_abs_noise
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(horizon: usize) -> PrivateCounter {
        PrivateCounter::new(horizon, 1.0, RandomSource::noiseless(0)).unwrap()
    }

    #[test]
    fn node_scales() {
        let c = PrivateCounter::new(8, 1.0, RandomSource::new(0)).unwrap();
        assert_eq!(c.noise_scale(), 4.0);
        let c = PrivateCounter::new(1, 2.0, RandomSource::new(0)).unwrap();
        assert_eq!(c.noise_scale(), 0.5);
        let c = PrivateCounter::new(1024, 1.0, RandomSource::new(0)).unwrap();
        assert_eq!(c.levels(), 11);
        assert_eq!(c.noise_scale(), 11.0);
    }

    #[test]
    fn ceil_log2_values() {
        let got: Vec<_> = [1, 2, 3, 4, 5, 8, 9, 1024, 1025]
            .iter()
            .map(|&n| ceil_log2(n))
            .collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 4, 10, 11]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PrivateCounter::new(0, 1.0, RandomSource::new(0)).is_err());
        assert!(PrivateCounter::new(4, 0.0, RandomSource::new(0)).is_err());
    }

    #[test]
    fn noiseless_prefix_sums() {
        let mut c = noiseless(4);
        let out: Vec<_> = [true, true, false, true]
            .iter()
            .map(|&b| c.feed(b).unwrap())
            .collect();
        assert_eq!(out, vec![1, 2, 2, 3]);
        let mut c = noiseless(8);
        assert!((0..8).all(|_| c.feed(false).unwrap() == 0));
    }

    #[test]
    fn feeding_past_horizon_fails() {
        let mut c = noiseless(2);
        c.feed(true).unwrap();
        c.feed(true).unwrap();
        assert!(matches!(c.feed(true), Err(Error::State(_))));
    }

    #[test]
    fn estimates_are_clamped() {
        let mut c = PrivateCounter::new(64, 0.05, RandomSource::new(8)).unwrap();
        for t in 1..=64 {
            let e = c.feed(t % 3 == 0).unwrap();
            assert!(e as usize <= t);
        }
    }

    #[test]
    fn noiseless_drift_at_most_one() {
        let mut src = RandomSource::new(77);
        let mut c = noiseless(1000);
        let mut prev = 0;
        for _ in 0..1000 {
            let e = c.feed(src.fair_coin()).unwrap();
            assert!(e.abs_diff(prev) <= 1);
            prev = e;
        }
    }

    #[test]
    fn node_noise_depends_only_on_seed() {
        let mut a = PrivateCounter::new(256, 1.0, RandomSource::new(5)).unwrap();
        let mut b = PrivateCounter::new(256, 1.0, RandomSource::new(5)).unwrap();
        let mut bits = RandomSource::new(6);
        for _ in 0..256 {
            let bit = bits.fair_coin();
            assert_eq!(a.feed(bit).unwrap(), b.feed(bit).unwrap());
        }
    }
}
