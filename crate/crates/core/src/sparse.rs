//! Sparse-vector mechanisms over caller-evaluated query values.
//!
//! [`AboveThreshold`] halts once its exact count of positive answers reaches
//! `r`. [`ChallengeAt`] instead feeds every answer to a [`PrivateCounter`]
//! and halts on the counter's noisy output, which is what lets it hide a
//! single replaced query as well as a replaced input.

use serde::{Deserialize, Serialize};

use crate::counter::PrivateCounter;
use crate::error::{Error, Result};
use crate::noise::{sample_laplace, LaplaceScale, RandomSource};

const QUERY_STREAM: u64 = 0x5155_4552;
const COUNTER_STREAM: u64 = 0x434f_554e;

/// Parameters shared by both sparse-vector mechanisms.
///
/// `horizon`, `beta` and `c_lambda` only matter for [`ChallengeAt`], which
/// sizes its counter error `lambda` from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseParams {
    pub threshold: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub reports: u64,
    pub sensitivity: f64,
    pub horizon: usize,
    pub beta: f64,
    pub c_gamma: f64,
    pub c_lambda: f64,
}

impl SparseParams {
    pub fn new(threshold: f64, epsilon: f64, delta: f64, reports: u64, horizon: usize) -> Self {
        Self {
            threshold,
            epsilon,
            delta,
            reports,
            sensitivity: 1.0,
            horizon,
            beta: 0.05,
            c_gamma: 1.0,
            c_lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("sensitivity", self.sensitivity)?;
        positive("c_gamma", self.c_gamma)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.c_lambda.is_nan() || self.c_lambda < 0.0 {
            return Err(Error::param("c_lambda must be non-negative"));
        }
        if self.reports == 0 {
            return Err(Error::param(
                "number of positive reports must be at least 1",
            ));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::param("threshold must be finite"));
        }
        Ok(())
    }

    /// Counter error allowance `c_lambda * (1/eps) * ln T * ln(T/beta)`.
    pub fn lambda(&self) -> f64 {
        let t = self.horizon as f64;
        self.c_lambda / self.epsilon * t.ln() * (t / self.beta).ln()
    }

    /// AboveThreshold scale `c_gamma * (Delta/eps) * sqrt(r) * ln(r/delta)`.
    pub fn above_threshold_gamma(&self) -> f64 {
        let r = self.reports as f64;
        self.c_gamma * self.sensitivity / self.epsilon * r.sqrt() * (r / self.delta).ln()
    }

    /// ChallengeAT scale `c_gamma * (Delta/eps) * sqrt(r+lambda) * ln((r+lambda)/delta)`.
    pub fn challenge_gamma(&self) -> f64 {
        let m = self.reports as f64 + self.lambda();
        self.c_gamma * self.sensitivity / self.epsilon * m.sqrt() * (m / self.delta).ln()
    }

    /// Accuracy gap `gamma * ln(T/beta)` of ChallengeAT on the good event.
    pub fn utility_gap(&self) -> f64 {
        self.challenge_gamma() * (self.horizon as f64 / self.beta).ln()
    }
}

/// Answer for one query. `halted` is set on the round that triggers halting;
/// `sigma` is still valid for that round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseAnswer {
    pub sigma: bool,
    pub halted: bool,
}

#[derive(Debug, Clone)]
pub struct AboveThreshold {
    params: SparseParams,
    scale: LaplaceScale,
    src: RandomSource,
    positives: u64,
    rounds: usize,
    halted: bool,
    max_abs_noise: f64,
}

impl AboveThreshold {
    pub fn new(params: SparseParams, src: RandomSource) -> Result<Self> {
        params.validate()?;
        let scale = LaplaceScale::new(params.above_threshold_gamma())?;
        Ok(Self {
            params,
            scale,
            src: src.fork(QUERY_STREAM),
            positives: 0,
            rounds: 0,
            halted: false,
            max_abs_noise: 0.0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.scale.gamma()
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn positives(&self) -> u64 {
        self.positives
    }

    pub fn max_abs_noise(&self) -> f64 {
        self.max_abs_noise
    }

    pub fn step(&mut self, value: f64) -> Result<SparseAnswer> {
        if self.halted {
            return Err(Error::state("AboveThreshold queried after halting"));
        }
        let noise = sample_laplace(&mut self.src, self.scale);
        self.max_abs_noise = self.max_abs_noise.max(noise.abs());
        let sigma = value + noise >= self.params.threshold;
        self.rounds += 1;
        self.positives += sigma as u64;
        self.halted = self.positives >= self.params.reports;
        Ok(SparseAnswer {
            sigma,
            halted: self.halted,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ChallengeAt {
    params: SparseParams,
    scale: LaplaceScale,
    src: RandomSource,
    counter: PrivateCounter,
    rounds: usize,
    halted: bool,
    max_abs_noise: f64,
    last_count: u64,
}

impl ChallengeAt {
    pub fn new(params: SparseParams, src: RandomSource) -> Result<Self> {
        params.validate()?;
        let scale = LaplaceScale::new(params.challenge_gamma())?;
        let counter =
            PrivateCounter::new(params.horizon, params.epsilon, src.fork(COUNTER_STREAM))?;
        Ok(Self {
            params,
            scale,
            src: src.fork(QUERY_STREAM),
            counter,
            rounds: 0,
            halted: false,
            max_abs_noise: 0.0,
            last_count: 0,
        })
    }

    pub fn params(&self) -> &SparseParams {
        &self.params
    }

    pub fn gamma(&self) -> f64 {
        self.scale.gamma()
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Noisy count of positive answers released by the counter.
    pub fn noisy_count(&self) -> u64 {
        self.last_count
    }

    /// Exact count of positive answers. Instrumentation only.
    pub fn exact_positives(&self) -> u64 {
        self.counter.true_count()
    }

    pub fn counter(&self) -> &PrivateCounter {
        &self.counter
    }

    pub fn max_abs_query_noise(&self) -> f64 {
        self.max_abs_noise
    }

    /// Whether every noise draw so far stayed within `ln(T/beta)` times its
    /// mean magnitude, for both the query noise and the counter nodes.
    pub fn within_good_event(&self) -> bool {
        let factor = (self.params.horizon as f64 / self.params.beta).ln();
        self.max_abs_noise <= self.scale.gamma() * factor
            && self.counter.max_abs_noise() <= self.counter.noise_scale() * factor
    }

    pub fn step(&mut self, value: f64) -> Result<SparseAnswer> {
        if self.halted {
            return Err(Error::state("ChallengeAT queried after halting"));
        }
        if self.counter.is_exhausted() {
            return Err(Error::state(format!(
                "ChallengeAT horizon {} exhausted",
                self.params.horizon
            )));
        }
        let noise = sample_laplace(&mut self.src, self.scale);
        self.max_abs_noise = self.max_abs_noise.max(noise.abs());
        let sigma = value + noise >= self.params.threshold;
        self.rounds += 1;
        self.last_count = self.counter.feed(sigma)?;
        self.halted = self.last_count >= self.params.reports;
        Ok(SparseAnswer {
            sigma,
            halted: self.halted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(threshold: f64, reports: u64, horizon: usize) -> SparseParams {
        SparseParams::new(threshold, 1.0, 1e-5, reports, horizon)
    }

    #[test]
    fn above_threshold_sign_comparison() {
        let mut at = AboveThreshold::new(params(0.0, 10, 16), RandomSource::noiseless(0)).unwrap();
        let sigmas: Vec<_> = [-1.0, 2.0, -3.0]
            .iter()
            .map(|&v| at.step(v).unwrap().sigma)
            .collect();
        assert_eq!(sigmas, vec![false, true, false]);
    }

    #[test]
    fn above_threshold_halts_at_r() {
        let mut at = AboveThreshold::new(params(0.0, 2, 16), RandomSource::noiseless(0)).unwrap();
        assert_eq!(
            at.step(1.0).unwrap(),
            SparseAnswer {
                sigma: true,
                halted: false
            }
        );
        assert_eq!(
            at.step(1.0).unwrap(),
            SparseAnswer {
                sigma: true,
                halted: true
            }
        );
        assert!(matches!(at.step(1.0), Err(Error::State(_))));
    }

    #[test]
    fn challenge_at_three_positives() {
        let mut cat = ChallengeAt::new(params(-1.0, 3, 16), RandomSource::noiseless(0)).unwrap();
        let answers: Vec<_> = [0.0, -2.0, 0.0, 0.0]
            .iter()
            .map(|&v| cat.step(v).unwrap())
            .collect();
        let sigmas: Vec<_> = answers.iter().map(|a| a.sigma).collect();
        assert_eq!(sigmas, vec![true, false, true, true]);
        assert!(answers[..3].iter().all(|a| !a.halted));
        assert!(answers[3].halted);
        assert!(cat.step(0.0).is_err());
    }

    #[test]
    fn challenge_at_never_halts_below_threshold() {
        let t = 2.5;
        let mut cat = ChallengeAt::new(params(t, 1, 64), RandomSource::noiseless(0)).unwrap();
        for _ in 0..64 {
            let a = cat.step(t - 1.0).unwrap();
            assert!(!a.sigma && !a.halted);
        }
        assert!(matches!(cat.step(t - 1.0), Err(Error::State(_))));
    }

    #[test]
    fn scales_follow_formulas() {
        let p = SparseParams::new(0.0, 0.5, 1e-3, 9, 100);
        let at_gamma = 2.0 * 3.0 * (9.0f64 / 1e-3).ln();
        assert!((p.above_threshold_gamma() - at_gamma).abs() < 1e-9);
        let lambda = 2.0 * 100f64.ln() * (100.0f64 / 0.05).ln();
        assert!((p.lambda() - lambda).abs() < 1e-9);
        let m = 9.0 + lambda;
        assert!((p.challenge_gamma() - 2.0 * m.sqrt() * (m / 1e-3).ln()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = params(0.0, 0, 8);
        assert!(AboveThreshold::new(p, RandomSource::new(0)).is_err());
        p.reports = 1;
        p.delta = 1.5;
        assert!(ChallengeAt::new(p, RandomSource::new(0)).is_err());
    }

    #[test]
    fn above_threshold_false_positive_rate() {
        let p = SparseParams::new(0.0, 1.0, 1e-5, 4, 1);
        let gamma = p.above_threshold_gamma();
        let value = p.threshold - 3.0 * gamma * 10f64.ln();
        let runs = 10_000;
        let hits = (0..runs)
            .filter(|&s| {
                let mut at = AboveThreshold::new(p, RandomSource::new(s)).unwrap();
                at.step(value).unwrap().sigma
            })
            .count();
        assert!(hits as f64 / runs as f64 <= 0.01, "{hits}");
    }

    #[test]
    fn challenge_at_no_false_positives_far_below() {
        let mut p = SparseParams::new(0.0, 1.0, 1e-5, 20, 4096);
        p.beta = 0.05;
        let value = p.threshold - p.utility_gap();
        let runs = 400;
        let bad = (0..runs)
            .filter(|&s| {
                let mut cat = ChallengeAt::new(p, RandomSource::new(1000 + s)).unwrap();
                let mut any = false;
                for _ in 0..p.horizon {
                    match cat.step(value) {
                        Ok(a) => {
                            any |= a.sigma;
                            if a.halted {
                                break;
                            }
                        }
                        Err(_) => break,
                    }
                }
                any
            })
            .count();
        assert!(bad as f64 / runs as f64 <= 0.05, "{bad}");
    }
}
