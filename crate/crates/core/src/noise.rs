//! Seeded randomness and inverse-CDF Laplace sampling.
//!
//! Every mechanism in the crate draws its noise through [`RandomSource`], so a
//! run is fully determined by its seeds. A source built with
//! [`RandomSource::noiseless`] still advances its stream on every draw but
//! returns zero from [`sample_laplace`]; this makes the mechanisms
//! deterministic and table-checkable while keeping the remaining randomness
//! (coin flips, expert selection) aligned with the noisy run.
//!
//! All arithmetic is plain `f64`. Floating-point Laplace sampling is not
//! formally differentially private; this crate targets simulation and
//! auditing, not deployment.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const TWO_POW_53: f64 = 9_007_199_254_740_992.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a parent seed with a label into a child seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ label.rotate_left(17) ^ 0xA076_1D64_78BD_642F)
}

/// A single-owner deterministic random stream.
///
/// Identical seeds produce bit-identical draw sequences. Sources are never
/// shared between mechanisms: use [`RandomSource::fork`] to hand a
/// mechanism its own independent stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
    noiseless: bool,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
            noiseless: false,
        }
    }

    /// A source whose Laplace draws are all zero.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            noiseless: true,
            ..Self::new(seed)
        }
    }

    pub fn with_noise(seed: u64, noise_enabled: bool) -> Self {
        if noise_enabled {
            Self::new(seed)
        } else {
            Self::noiseless(seed)
        }
    }

    /// An independent child stream. The child inherits the noise switch.
    pub fn fork(&self, label: u64) -> Self {
        let mut child = Self::new(derive_seed(self.seed, label));
        child.noiseless = self.noiseless;
        child
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of uniform draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn is_noiseless(&self) -> bool {
        self.noiseless
    }

    /// A uniform draw from the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) / TWO_POW_53
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.draws += 1;
        self.rng.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn fair_coin(&mut self) -> bool {
        self.bernoulli(0.5)
    }
}

/// Scale parameter of a zero-centered Laplace distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Self(gamma))
        } else {
            Err(Error::param(format!(
                "laplace scale must be positive and finite, got {gamma}"
            )))
        }
    }

    /// Scale `sensitivity / epsilon` used by the Laplace mechanism.
    pub fn for_query(sensitivity: f64, epsilon: f64) -> Result<Self> {
        if sensitivity.is_nan() || sensitivity <= 0.0 {
            return Err(Error::param(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::param(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Self::new(sensitivity / epsilon)
    }

    pub fn gamma(self) -> f64 {
        self.0
    }

    /// The value `|X|` exceeds with probability `p`.
    pub fn abs_quantile(self, p: f64) -> f64 {
        -self.0 * p.ln()
    }
}

/// Inverse CDF of Laplace(`gamma`) evaluated at `u` in (0, 1).
pub fn laplace_from_uniform(u: f64, gamma: f64) -> f64 {
    let centered = u - 0.5;
    if centered == 0.0 {
        return 0.0;
    }
    -gamma * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

pub fn laplace_cdf(x: f64, gamma: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / gamma).exp()
    } else {
        1.0 - 0.5 * (-x / gamma).exp()
    }
}

/// One Laplace draw; consumes exactly one uniform from `src`.
pub fn sample_laplace(src: &mut RandomSource, scale: LaplaceScale) -> f64 {
    let u = src.uniform();
    if src.noiseless {
        return 0.0;
    }
    laplace_from_uniform(u, scale.gamma())
}

/// Returns `value + Lap(sensitivity / epsilon)`.
pub fn laplace_mechanism(
    value: f64,
    sensitivity: f64,
    epsilon: f64,
    src: &mut RandomSource,
) -> Result<f64> {
    let scale = LaplaceScale::for_query(sensitivity, epsilon)?;
    Ok(value + sample_laplace(src, scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf_fixed_points() {
        assert_eq!(laplace_from_uniform(0.5, 1.0), 0.0);
        assert!((laplace_from_uniform(0.75, 1.0) - 0.5f64.ln().abs()).abs() < 1e-12);
        assert!((laplace_from_uniform(0.25, 1.0) + 0.5f64.ln().abs()).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_inverts_cdf() {
        for &u in &[0.01, 0.2, 0.4999, 0.6, 0.93] {
            let x = laplace_from_uniform(u, 2.5);
            assert!((laplace_cdf(x, 2.5) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_scales() {
        assert!(LaplaceScale::new(0.0).is_err());
        assert!(LaplaceScale::new(-1.0).is_err());
        assert!(LaplaceScale::new(f64::NAN).is_err());
        assert!(laplace_mechanism(0.0, 0.0, 1.0, &mut RandomSource::new(1)).is_err());
        assert!(laplace_mechanism(0.0, 1.0, -1.0, &mut RandomSource::new(1)).is_err());
    }

    #[test]
    fn mechanism_scale_is_sensitivity_over_epsilon() {
        assert_eq!(LaplaceScale::for_query(2.0, 0.5).unwrap().gamma(), 4.0);
    }

    #[test]
    fn noiseless_mode_returns_value() {
        let mut src = RandomSource::noiseless(3);
        assert_eq!(laplace_mechanism(7.0, 1.0, 1.0, &mut src).unwrap(), 7.0);
        assert_eq!(src.draws(), 1);
    }

    #[test]
    fn one_uniform_per_draw() {
        let mut src = RandomSource::new(11);
        let scale = LaplaceScale::new(1.0).unwrap();
        for n in 1..=10 {
            sample_laplace(&mut src, scale);
            assert_eq!(src.draws(), n);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let scale = LaplaceScale::new(3.0).unwrap();
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        for _ in 0..100 {
            assert_eq!(
                sample_laplace(&mut a, scale).to_bits(),
                sample_laplace(&mut b, scale).to_bits()
            );
        }
        let mut c = RandomSource::new(43);
        assert_ne!(a.uniform(), c.uniform());
    }

    #[test]
    fn forks_are_independent_and_inherit_switch() {
        let parent = RandomSource::noiseless(5);
        let mut x = parent.fork(1);
        let mut y = parent.fork(2);
        assert!(x.is_noiseless());
        assert_ne!(x.uniform(), y.uniform());
        assert_eq!(
            parent.fork(1).uniform(),
            RandomSource::noiseless(5).fork(1).uniform()
        );
    }

    #[test]
    fn uniform_stays_open() {
        let mut src = RandomSource::new(0);
        for _ in 0..10_000 {
            let u = src.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn moments_at_gamma_two() {
        let scale = LaplaceScale::new(2.0).unwrap();
        let mut src = RandomSource::new(2024);
        let n = 1_000_000;
        let (mut sum, mut abs_sum) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_laplace(&mut src, scale);
            sum += x;
            abs_sum += x.abs();
        }
        assert!((sum / n as f64).abs() < 0.02);
        assert!((abs_sum / n as f64 - 2.0).abs() < 0.02);
    }

    #[test]
    fn mechanism_tail_quantile() {
        // P(X > x) = exp(-x)/2 for Lap(1), so the signed 95th percentile is ln 10.
        let mut src = RandomSource::new(99);
        let mut out: Vec<f64> = (0..100_000)
            .map(|_| laplace_mechanism(0.0, 1.0, 1.0, &mut src).unwrap())
            .collect();
        out.sort_by(f64::total_cmp);
        let q95 = out[(0.95 * out.len() as f64) as usize];
        let expected = -(0.1f64.ln());
        assert!((q95 - expected).abs() / expected < 0.10, "q95 = {q95}");
    }

    #[test]
    fn ks_statistic_against_analytic_cdf() {
        for &gamma in &[0.5, 1.0, 4.0] {
            let scale = LaplaceScale::new(gamma).unwrap();
            let mut src = RandomSource::new(gamma.to_bits());
            let mut xs: Vec<f64> = (0..100_000)
                .map(|_| sample_laplace(&mut src, scale))
                .collect();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = laplace_cdf(x, gamma);
                    (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 0.01, "gamma {gamma}: KS {d}");
        }
    }
}
