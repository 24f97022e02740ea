use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::cat_game::{run_challenge_at_game, QueryMove, ScriptedQueries};
use super::online::{
    run_online_game, AdversaryMove, GameTranscript, OnlineMechanism, Released, ScriptedAdversary,
};
use crate::error::{Error, Result};
use crate::learners::{FiniteHypothesisClass, LabeledExample, Soa};
use crate::noise::{derive_seed, RandomSource};
use crate::params::{Constants, PrivacyBudget};
use crate::pop::{Pop, PopConfig};
use crate::sparse::SparseParams;

/// Largest supported event prefix.
pub const MAX_PREFIX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Trials per value of the secret bit.
    pub trials: u64,
    /// Joint confidence of all bounds after the Bonferroni split.
    pub confidence: f64,
    pub delta: f64,
    /// Events are the first `prefix` released answers.
    pub prefix: usize,
    pub seed: u64,
    pub target: f64,
    pub slack: f64,
}

impl AuditConfig {
    pub fn new(trials: u64, prefix: usize, target: f64) -> Self {
        Self {
            trials,
            confidence: 0.95,
            delta: 0.0,
            prefix,
            seed: 0,
            target,
            slack: 0.0,
        }
    }

    pub fn family_size(&self) -> u64 {
        4u64.pow(self.prefix as u32)
    }

    /// Per-bound error probability: one lower and one upper bound for every
    /// (event, bit) pair.
    pub fn alpha_per_bound(&self) -> f64 {
        (1.0 - self.confidence) / (4 * self.family_size()) as f64
    }

    /// Smallest trial count at which an event seen in every trial under one
    /// bit and never under the other yields a positive lower bound.
    pub fn required_trials(&self) -> u64 {
        let a = self.alpha_per_bound();
        let informative = |n: u64| {
            let hi = a.powf(1.0 / n as f64);
            hi - self.delta > 1.0 - hi
        };
        let mut n = 1;
        while !informative(n) {
            n += 1;
        }
        n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::param(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::param(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if self.prefix == 0 || self.prefix > MAX_PREFIX {
            return Err(Error::param(format!(
                "event prefix must be in 1..={MAX_PREFIX}, got {}",
                self.prefix
            )));
        }
        let required = self.required_trials();
        if self.trials < required {
            return Err(Error::param(format!(
                "{} trials cannot reach confidence {} over {} events; at least {required} trials per bit are required",
                self.trials,
                self.confidence,
                self.family_size()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    /// No violation detected. Not a proof of privacy.
    Pass,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCount {
    pub event: u64,
    pub under_zero: u64,
    pub under_one: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub game: String,
    pub trials: u64,
    pub prefix: usize,
    pub confidence: f64,
    pub delta: f64,
    pub counts: Vec<EventCount>,
    /// Event and direction attaining the bound; `reversed` means the
    /// ratio is `Pr[F | 1] / Pr[F | 0]`.
    pub witness: Option<(u64, bool)>,
    pub epsilon_lower: f64,
    pub point_estimate: Option<f64>,
    pub interval: (f64, f64),
    pub target: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

/// One-sided Clopper-Pearson lower bound for `x` successes in `n` trials.
pub fn clopper_pearson_lower(x: u64, n: u64, alpha: f64) -> f64 {
    if x == 0 {
        return 0.0;
    }
    if x == n {
        return alpha.powf(1.0 / n as f64);
    }
    let (a, b) = (x as f64, (n - x + 1) as f64);
    // Lower bound p solves P[Bin(n, p) >= x] = alpha, i.e. I_p(x, n-x+1) = alpha.
    bisect(|p| beta_reg(a, b, p) - alpha)
}

/// One-sided Clopper-Pearson upper bound.
pub fn clopper_pearson_upper(x: u64, n: u64, alpha: f64) -> f64 {
    1.0 - clopper_pearson_lower(n - x, n, alpha)
}

fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn log_ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        f64::NEG_INFINITY
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        (num / den).ln()
    }
}

type Counts = HashMap<u64, [u64; 2]>;

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (k, v) in b {
        let e = a.entry(k).or_insert([0, 0]);
        e[0] += v[0];
        e[1] += v[1];
    }
    a
}

/// Estimates a lower bound on the privacy loss of a game from `trials`
/// independent runs under each bit. `runner(b, trial)` plays one game and
/// must derive all of its randomness from its arguments.
pub fn audit_epsilon<F>(game: &str, runner: F, config: &AuditConfig) -> Result<AuditReport>
where
    F: Fn(bool, u64) -> Result<GameTranscript> + Sync,
{
    config.validate()?;
    let k = config.prefix;
    let counts = (0..config.trials)
        .into_par_iter()
        .try_fold(Counts::new, |mut acc, trial| {
            for b in [false, true] {
                let key = runner(b, trial)?.prefix_key(k);
                acc.entry(key).or_insert([0, 0])[b as usize] += 1;
            }
            Ok::<_, Error>(acc)
        })
        .try_reduce(Counts::new, |a, b| Ok(merge(a, b)))?;
    let counts: BTreeMap<u64, [u64; 2]> = counts.into_iter().collect();

    let n = config.trials;
    let nf = n as f64;
    let alpha = config.alpha_per_bound();
    let delta = config.delta;
    let mut best = (0.0f64, None, None::<f64>, (0.0f64, f64::INFINITY));
    for (&event, c) in &counts {
        for reversed in [false, true] {
            let (num, den) = if reversed { (c[1], c[0]) } else { (c[0], c[1]) };
            let lower = log_ratio(
                clopper_pearson_lower(num, n, alpha) - delta,
                clopper_pearson_upper(den, n, alpha),
            );
            if best.1.is_none() || lower > best.0 {
                let upper = log_ratio(
                    clopper_pearson_upper(num, n, alpha) - delta,
                    clopper_pearson_lower(den, n, alpha),
                );
                let point = log_ratio(num as f64 / nf - delta, den as f64 / nf);
                best = (
                    lower,
                    Some((event, reversed)),
                    point.is_finite().then_some(point),
                    (lower, upper),
                );
            }
        }
    }
    let (lower, witness, point, interval) = best;
    let lower = lower.max(0.0);
    let interval = (interval.0.max(0.0), interval.1.max(0.0));
    Ok(AuditReport {
        game: game.to_string(),
        trials: n,
        prefix: k,
        confidence: config.confidence,
        delta,
        counts: counts
            .into_iter()
            .map(|(event, c)| EventCount {
                event,
                under_zero: c[0],
                under_one: c[1],
            })
            .collect(),
        witness,
        epsilon_lower: lower,
        point_estimate: point,
        interval,
        target: config.target,
        slack: config.slack,
        verdict: if lower <= config.target + config.slack {
            Verdict::Pass
        } else {
            Verdict::Violation
        },
    })
}

/// Randomness for trial `trial` under bit `b`; the two bits never share a
/// stream.
pub fn trial_source(seed: u64, b: bool, trial: u64) -> RandomSource {
    RandomSource::new(derive_seed(derive_seed(seed, b as u64), trial))
}

/// One-round randomized response: releases `b`, flipped with probability
/// `1 / (1 + e^epsilon)`.
pub fn randomized_response(
    epsilon: f64,
    seed: u64,
) -> impl Fn(bool, u64) -> Result<GameTranscript> + Sync {
    let flip = 1.0 / (1.0 + epsilon.exp());
    move |b, trial| {
        let mut src = trial_source(seed, b, trial);
        let mut t = GameTranscript::new(trial);
        t.push(Released::Label(b ^ src.bernoulli(flip)), false, true);
        Ok(t)
    }
}

/// Predicts the label it was given in the previous round, so a challenge
/// label resurfaces, unmasked, one round later.
#[derive(Debug, Clone, Default)]
pub struct EchoPrevious {
    last: bool,
}

impl OnlineMechanism for EchoPrevious {
    fn predict(&mut self, _x: usize) -> Result<Option<bool>> {
        Ok(Some(self.last))
    }

    fn learn(&mut self, y: bool) -> Result<()> {
        self.last = y;
        Ok(())
    }
}

/// Online game against [`EchoPrevious`]: a challenge on the label in round
/// one, then a plain round.
pub fn echo_leak() -> impl Fn(bool, u64) -> Result<GameTranscript> + Sync {
    move |b, trial| {
        let x = LabeledExample::new(0, false);
        let mut adv = ScriptedAdversary::new(
            trial,
            vec![
                AdversaryMove::challenge(x, LabeledExample::new(0, true)),
                AdversaryMove::plain(x),
            ],
        );
        run_online_game(&mut EchoPrevious::default(), &mut adv, 2, 1, b)
    }
}

/// Parameters of the ChallengeAT probe: the first `g` rounds are challenges
/// that are far below the threshold under bit 0 and far above it under bit
/// 1; the rest sit on the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatProbe {
    pub params: SparseParams,
    pub g: usize,
    /// Whether the two datasets differ (by the query sensitivity).
    pub neighboring: bool,
    pub seed: u64,
}

impl CatProbe {
    pub fn runner(self) -> impl Fn(bool, u64) -> Result<GameTranscript> + Sync {
        move |b, trial| {
            let p = self.params;
            let far = 10.0 * (p.challenge_gamma() + p.lambda()) + 1.0;
            let moves = (0..p.horizon)
                .map(|i| {
                    if i < self.g {
                        QueryMove::challenge(p.threshold - far, p.threshold + far)
                    } else {
                        QueryMove::plain(p.threshold)
                    }
                })
                .collect();
            let shift = if self.neighboring { p.sensitivity } else { 0.0 };
            let mut adv = ScriptedQueries {
                seed: trial,
                datasets: [0.0, shift],
                moves,
            };
            run_challenge_at_game(&mut adv, p, self.g, b, trial_source(self.seed, b, trial))
        }
    }
}

/// Parameters of the POP probe: SOA experts over thresholds on `domain`
/// points, a realizable stream, and a challenge in round one that offers
/// the opposite label under bit 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopProbe {
    pub k: usize,
    pub reports: u64,
    pub domain: usize,
    pub budget: PrivacyBudget,
    pub constants: Constants,
    pub g: usize,
    pub seed: u64,
}

impl PopProbe {
    pub fn runner(self) -> Result<impl Fn(bool, u64) -> Result<GameTranscript> + Sync> {
        let class = Arc::new(FiniteHypothesisClass::thresholds(self.domain)?);
        let cfg = PopConfig::new(self.k, self.reports, self.budget, self.constants);
        cfg.validate()?;
        let horizon = self.budget.horizon;
        let cut = self.domain / 2;
        let stream: Vec<_> = (0..horizon)
            .map(|i| {
                let x = (i * 7 + 3) % self.domain;
                LabeledExample::new(x, x >= cut)
            })
            .collect();
        let challenges: Vec<usize> = (1..=self.g).collect();
        Ok(move |b, trial| {
            let mut pop = Pop::new(
                cfg.clone(),
                Soa::new(class.clone()),
                trial_source(self.seed, b, trial),
            )?;
            let alt = LabeledExample::new(stream[0].x, !stream[0].y);
            let mut adv = ScriptedAdversary::probe(trial, &stream, &challenges, alt);
            run_online_game(&mut pop, &mut adv, horizon, self.g, b)
        })
    }
}

/// Audits a `g`-challenge game against the group bound: target
/// `g * c_priv * epsilon` with additive term `g e^{epsilon g} delta`.
pub fn group_privacy_check<F>(
    game: &str,
    runner: F,
    g: usize,
    epsilon: f64,
    delta: f64,
    c_priv: f64,
    config: &AuditConfig,
) -> Result<AuditReport>
where
    F: Fn(bool, u64) -> Result<GameTranscript> + Sync,
{
    let gf = g as f64;
    let cfg = AuditConfig {
        target: gf * c_priv * epsilon,
        delta: (gf * (epsilon * gf).exp() * delta).min(0.5),
        ..*config
    };
    audit_epsilon(game, runner, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom_tail_ge(x: u64, n: u64, p: f64) -> f64 {
        // Direct summation, adequate for small n.
        (x..=n)
            .map(|j| {
                let lc: f64 = (1..=j).map(|i| ((n - j + i) as f64 / i as f64).ln()).sum();
                (lc + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
            })
            .sum()
    }

    #[test]
    fn clopper_pearson_matches_binomial_tail() {
        for &(x, n) in &[(1u64, 10u64), (5, 10), (9, 10), (30, 50)] {
            let lo = clopper_pearson_lower(x, n, 0.025);
            assert!((binom_tail_ge(x, n, lo) - 0.025).abs() < 1e-9, "{x}/{n}");
            let hi = clopper_pearson_upper(x, n, 0.025);
            assert!(
                (1.0 - binom_tail_ge(x + 1, n, hi) - 0.025).abs() < 1e-9,
                "{x}/{n}"
            );
        }
        assert_eq!(clopper_pearson_lower(0, 10, 0.05), 0.0);
        assert_eq!(clopper_pearson_upper(10, 10, 0.05), 1.0);
        assert!((clopper_pearson_upper(0, 10, 0.05) - (1.0 - 0.05f64.powf(0.1))).abs() < 1e-12);
    }

    #[test]
    fn refuses_tiny_samples() {
        let cfg = AuditConfig::new(5, 4, 1.0);
        let err = audit_epsilon("rr", randomized_response(1.0, 0), &cfg)
            .unwrap_err()
            .to_string();
        assert!(err.contains("required"), "{err}");
        let need = cfg.required_trials();
        assert!(audit_epsilon(
            "rr",
            randomized_response(1.0, 0),
            &AuditConfig::new(need, 4, 1.0)
        )
        .is_ok());
    }

    #[test]
    fn bit_independent_game_has_zero_bound() {
        let runner = |_b: bool, trial: u64| {
            let mut src = trial_source(9, false, trial);
            let mut t = GameTranscript::new(trial);
            t.push(Released::Label(src.fair_coin()), false, true);
            Ok(t)
        };
        let report = audit_epsilon("coin", runner, &AuditConfig::new(20_000, 1, 0.0)).unwrap();
        assert_eq!(report.epsilon_lower, 0.0);
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn randomized_response_is_estimated() {
        let report = audit_epsilon(
            "rr",
            randomized_response(1.0, 3),
            &AuditConfig::new(200_000, 1, 1.0),
        )
        .unwrap();
        let est = report.point_estimate.unwrap();
        assert!((est - 1.0).abs() < 0.05, "{est}");
        assert!(report.epsilon_lower <= 1.0 && report.epsilon_lower > 0.85);
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn echo_leak_bound_grows_with_trials() {
        let at = |n| {
            audit_epsilon("echo", echo_leak(), &AuditConfig::new(n, 2, 1.0))
                .unwrap()
                .epsilon_lower
        };
        let (small, large) = (at(1_000), at(100_000));
        assert!(small > 2.0 && large > small + 3.0, "{small} {large}");
    }

    #[test]
    fn merge_is_order_free() {
        let a: Counts = [(1, [2, 3]), (4, [0, 1])].into_iter().collect();
        let b: Counts = [(1, [1, 1]), (7, [5, 0])].into_iter().collect();
        assert_eq!(merge(a.clone(), b.clone()), merge(b, a));
    }
}
