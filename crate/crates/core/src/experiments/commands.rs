use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{AuditGame, Command, ExperimentConfig};
use super::output::{Outcome, Series};
use crate::counter::PrivateCounter;
use crate::error::{Error, Result};
use crate::games::audit::{echo_leak, randomized_response, CatProbe, PopProbe};
use crate::games::{
    audit_epsilon, coin_tail_bound, group_privacy_check, run_coin_game, AuditConfig, CoinGameState,
    CoinStrategy, Verdict,
};
use crate::learners::{
    corrupt_labels, make_realizable_stream, optimal_mistakes, FiniteHypothesisClass, Soa,
    StreamStyle,
};
use crate::noise::{derive_seed, RandomSource};
use crate::params::{Constants, PrivacyBudget};
use crate::pop::{
    agnostic_pop_run, HaltCause, Pop, PopConfig, RewindMode, RoundOutcome, RoundRecord,
};
use crate::sparse::SparseParams;

/// Nearest-rank quantile of `sorted`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest counter error over a uniformly random bit stream of length
/// `horizon`.
pub fn counter_max_error(horizon: usize, epsilon: f64, seed: u64, noise: bool) -> Result<u64> {
    let src = RandomSource::with_noise(seed, noise);
    let mut bits = src.fork(1);
    let mut counter = PrivateCounter::new(horizon, epsilon, src.fork(2))?;
    for _ in 0..horizon {
        counter.feed(bits.fair_coin())?;
    }
    Ok(counter.max_error())
}

pub fn run_counter_bench(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let eps = cfg.budget.epsilon;
    let mut median = Series::new("median", "horizon", "median_max_error");
    let mut q95 = Series::new("q95", "horizon", "q95_max_error");
    let mut log_points = Vec::new();
    for &t in &cfg.counter.horizons {
        let errors = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = derive_seed(derive_seed(cfg.seed, t as u64), trial);
                counter_max_error(t, eps, seed, !cfg.no_noise).map(|e| (trial, seed, e))
            })
            .collect::<Result<Vec<_>>>()?;
        for &(trial, seed, e) in &errors {
            out.record(
                "trial",
                &json!({ "horizon": t, "trial": trial, "seed": seed, "max_error": e }),
            )?;
        }
        let s = sorted(errors.iter().map(|e| e.2 as f64));
        let (q50, q90, q95v, max) = (
            quantile(&s, 0.5),
            quantile(&s, 0.9),
            quantile(&s, 0.95),
            s[s.len() - 1],
        );
        out.record(
            "horizon",
            &json!({ "horizon": t, "trials": cfg.trials, "median": q50, "q90": q90, "q95": q95v, "max": max }),
        )?;
        median.points.push((t as f64, q50));
        q95.points.push((t as f64, q95v));
        log_points.push(((t as f64).ln(), q50.max(1.0).ln()));
    }
    let slope = if log_points.len() >= 2 {
        linear_slope(&log_points)
    } else {
        f64::NAN
    };
    out.record("slope", &json!({ "loglog_slope_median": slope }))?;
    out.summary = median
        .points
        .iter()
        .map(|(t, m)| format!("T = {t}: median max error {m}"))
        .chain(std::iter::once(format!("log-log slope {slope:.3}")))
        .collect::<Vec<_>>()
        .join("\n");
    out.series = vec![median, q95];
    Ok(out)
}

/// Everything a single POP run needs besides the class and the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopSetup {
    pub budget: PrivacyBudget,
    pub constants: Constants,
    pub k: Option<usize>,
    pub reports: Option<u64>,
    pub style: StreamStyle,
    pub rewind: RewindMode,
    pub corruptions: usize,
}

impl PopSetup {
    pub fn new(budget: PrivacyBudget, constants: Constants, style: StreamStyle) -> Self {
        Self {
            budget,
            constants,
            k: None,
            reports: None,
            style,
            rewind: RewindMode::Tally,
            corruptions: 0,
        }
    }

    pub fn config(&self, d: u32) -> Result<PopConfig> {
        let mut cfg = PopConfig::for_mistake_bound(d.max(1), self.budget, self.constants)?;
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(r) = self.reports {
            cfg.reports = r;
        }
        cfg.rewind = self.rewind;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopTrial {
    pub seed: u64,
    pub target: usize,
    pub k: usize,
    pub reports: u64,
    pub mistakes: u64,
    /// Rounds in which POP released a prediction.
    pub predicted: usize,
    /// 1-based round in which ChallengeAT halted, if it did.
    pub halted_at: Option<usize>,
    pub cause: HaltCause,
    /// Mistakes of the best hypothesis on the (possibly corrupted) stream.
    pub optimal: usize,
}

impl PopTrial {
    pub fn premature_halt(&self, horizon: usize) -> bool {
        self.halted_at.is_some_and(|r| r <= horizon)
    }
}

/// One POP run with SOA experts on a stream labeled by a seeded random row
/// of `class`.
pub fn pop_trial(
    class: &Arc<FiniteHypothesisClass>,
    setup: &PopSetup,
    seed: u64,
    noise: bool,
    keep_rounds: bool,
) -> Result<(PopTrial, Vec<RoundRecord>)> {
    let src = RandomSource::with_noise(seed, noise);
    let cfg = setup.config(class.ldim())?;
    let target = src.fork(1).below(class.len());
    let horizon = setup.budget.horizon;
    let clean = make_realizable_stream(class, target, horizon, setup.style, &mut src.fork(2))?;
    let (stream, _) = corrupt_labels(&clean, setup.corruptions, &mut src.fork(3))?;
    let (k, reports) = (cfg.k, cfg.reports);
    let mut pop = Pop::new(cfg, Soa::new(class.clone()), src.fork(4))?;
    let mut rounds = Vec::new();
    let mut halted_at = None;
    let mut predicted = 0;
    for (i, ex) in stream.iter().enumerate() {
        match pop.round(ex.x)? {
            RoundOutcome::Predict(_) => {
                predicted += 1;
                let rec = pop.feed_label(ex.y)?;
                if keep_rounds {
                    rounds.push(rec);
                }
            }
            RoundOutcome::Halted => {
                halted_at = Some(i + 1);
                break;
            }
        }
        if pop.is_halted() {
            break;
        }
    }
    let trial = PopTrial {
        seed,
        target,
        k,
        reports,
        mistakes: pop.mistakes(),
        predicted,
        halted_at,
        cause: pop.halt_cause(),
        optimal: optimal_mistakes(class, &stream),
    };
    Ok((trial, rounds))
}

fn load_class(
    cfg: &ExperimentConfig,
    fallback_domain: usize,
) -> Result<Arc<FiniteHypothesisClass>> {
    Ok(Arc::new(match &cfg.class {
        Some(path) => FiniteHypothesisClass::load(path)?,
        None => FiniteHypothesisClass::thresholds(fallback_domain)?,
    }))
}

fn pop_setup(cfg: &ExperimentConfig) -> PopSetup {
    PopSetup {
        budget: cfg.budget,
        constants: cfg.constants,
        k: cfg.pop.k,
        reports: cfg.pop.reports,
        style: cfg.pop.style,
        rewind: cfg.pop.rewind,
        corruptions: cfg.pop.corruptions,
    }
}

fn run_pop(cfg: &ExperimentConfig) -> Result<Outcome> {
    let class = load_class(cfg, cfg.pop.domain)?;
    let mut out = Outcome::default();
    let setup = pop_setup(cfg);
    if cfg.pop.agnostic {
        let src = cfg.source(cfg.seed);
        let target = src.fork(1).below(class.len());
        let clean = make_realizable_stream(
            &class,
            target,
            cfg.budget.horizon,
            setup.style,
            &mut src.fork(2),
        )?;
        let (stream, flipped) = corrupt_labels(&clean, setup.corruptions, &mut src.fork(3))?;
        let run = agnostic_pop_run(&class, &stream, cfg.budget, cfg.constants, &src.fork(4))?;
        out.record("params", &run.params)?;
        let mut cumulative = Series::new("phase_mistakes", "phase_end", "cumulative_mistakes");
        let mut total = 0;
        for p in &run.phases {
            out.record("phase", p)?;
            total += p.mistakes;
            cumulative.points.push((p.end as f64, total as f64));
        }
        out.record(
            "summary",
            &json!({
                "seed": cfg.seed,
                "target": target,
                "flipped": flipped.len(),
                "optimal": optimal_mistakes(&class, &stream),
                "phases": run.phases.len(),
                "mistakes": run.total_mistakes,
            }),
        )?;
        out.summary = format!(
            "{} mistakes over {} phases",
            run.total_mistakes,
            run.phases.len()
        );
        out.series.push(cumulative);
        return Ok(out);
    }
    let (trial, rounds) = pop_trial(&class, &setup, cfg.seed, !cfg.no_noise, true)?;
    let mut cumulative = Series::new("mistakes", "round", "cumulative_mistakes");
    let mut total = 0;
    for r in &rounds {
        out.record("round", r)?;
        total += r.mistake as u64;
        cumulative.points.push((r.i as f64, total as f64));
    }
    out.record("summary", &trial)?;
    out.summary = format!(
        "{} mistakes in {} predicted rounds (k = {}, r = {}, halt: {:?})",
        trial.mistakes, trial.predicted, trial.k, trial.reports, trial.cause
    );
    out.series.push(cumulative);
    Ok(out)
}

/// Medians of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Cell {
    epsilon: f64,
    domain: usize,
    d: u32,
    horizon: usize,
    trials: u64,
    median_mistakes: f64,
    premature_halt_rate: f64,
}

pub fn run_pop_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let horizons = if cfg.sweep.horizons.is_empty() {
        vec![cfg.budget.horizon]
    } else {
        cfg.sweep.horizons.clone()
    };
    let mut cells = Vec::new();
    for &domain in &cfg.sweep.domains {
        let class = Arc::new(FiniteHypothesisClass::thresholds(domain)?);
        let d = class.ldim();
        for &epsilon in &cfg.sweep.epsilons {
            for &horizon in &horizons {
                let mut setup = pop_setup(cfg);
                setup.budget.epsilon = epsilon;
                setup.budget.horizon = horizon;
                let trials = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let seed = derive_seed(cfg.seed, t);
                        pop_trial(&class, &setup, seed, !cfg.no_noise, false).map(|r| r.0)
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (t, trial) in trials.iter().enumerate() {
                    out.record(
                        "trial",
                        &json!({ "epsilon": epsilon, "domain": domain, "horizon": horizon, "trial": t, "result": trial }),
                    )?;
                }
                let m = sorted(trials.iter().map(|t| t.mistakes as f64));
                let halts = trials.iter().filter(|t| t.premature_halt(horizon)).count();
                let cell = Cell {
                    epsilon,
                    domain,
                    d,
                    horizon,
                    trials: cfg.trials,
                    median_mistakes: quantile(&m, 0.5),
                    premature_halt_rate: halts as f64 / trials.len() as f64,
                };
                out.record("cell", &cell)?;
                cells.push(cell);
            }
        }
    }
    for &horizon in &horizons {
        for &domain in &cfg.sweep.domains {
            let mut s = Series::new(
                format!("eps_n{domain}_t{horizon}"),
                "epsilon",
                "median_mistakes",
            );
            s.points = cells
                .iter()
                .filter(|c| c.domain == domain && c.horizon == horizon)
                .map(|c| (c.epsilon, c.median_mistakes))
                .collect();
            out.series.push(s);
        }
        for &epsilon in &cfg.sweep.epsilons {
            let mut s = Series::new(format!("d_eps{epsilon}_t{horizon}"), "d", "median_mistakes");
            s.points = cells
                .iter()
                .filter(|c| c.epsilon == epsilon && c.horizon == horizon)
                .map(|c| (c.d as f64, c.median_mistakes))
                .collect();
            out.series.push(s);
        }
    }
    out.summary = cells
        .iter()
        .map(|c| {
            format!(
                "eps = {}, d = {}, T = {}: median mistakes {}, premature halts {:.1}%",
                c.epsilon,
                c.d,
                c.horizon,
                c.median_mistakes,
                100.0 * c.premature_halt_rate
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(out)
}

struct FixedBiases(f64, f64);

impl CoinStrategy for FixedBiases {
    fn choose(&mut self, _state: &CoinGameState) -> (f64, f64) {
        (self.0, self.1)
    }
}

fn run_coin(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.coin;
    let rewards = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut src = RandomSource::new(derive_seed(cfg.seed, t));
            match c.fixed {
                Some([p, q]) => run_coin_game(&mut FixedBiases(p, q), c.k, c.m, &mut src),
                None => run_coin_game(c.strategy.build().as_mut(), c.k, c.m, &mut src),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    let histogram: BTreeMap<u64, u64> = rewards.iter().fold(BTreeMap::new(), |mut h, &r| {
        *h.entry(r).or_insert(0) += 1;
        h
    });
    out.record("histogram", &json!({ "reward_counts": histogram }))?;
    let n = rewards.len() as f64;
    let mut tail = Series::new("tail", "lambda", "empirical_tail");
    let mut failures = Vec::new();
    for &lambda in &c.lambdas {
        let p = rewards.iter().filter(|&&r| r as f64 > lambda).count() as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        let bound = coin_tail_bound(c.k, lambda);
        let ok = p <= bound + 3.0 * se;
        if !ok {
            failures.push(lambda);
        }
        out.record(
            "tail",
            &json!({ "lambda": lambda, "empirical": p, "std_error": se, "bound": bound, "within_bound": ok }),
        )?;
        tail.points.push((lambda, p));
    }
    let mean = rewards.iter().sum::<u64>() as f64 / n;
    let name = match c.fixed {
        Some([p, q]) => format!("fixed ({p}, {q})"),
        None => c.strategy.name().to_string(),
    };
    out.summary = format!("{name} strategy, k = {}: mean reward {mean:.3}", c.k);
    if !failures.is_empty() {
        out.violation = Some(format!(
            "empirical tail above the bound at lambda = {failures:?}"
        ));
    }
    out.series.push(tail);
    Ok(out)
}

fn run_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let a = &cfg.audit;
    let eps = cfg.budget.epsilon;
    let c_priv = cfg.constants.c_priv;
    let base = AuditConfig {
        trials: cfg.trials,
        confidence: a.confidence,
        delta: cfg.budget.delta,
        prefix: a.prefix.min(a.horizon.max(1)),
        seed: cfg.seed,
        target: c_priv * eps,
        slack: a.slack,
    };
    let sparse = SparseParams {
        beta: cfg.budget.beta,
        c_gamma: cfg.constants.c_gamma,
        c_lambda: cfg.constants.c_lambda,
        ..SparseParams::new(a.threshold, eps, cfg.budget.delta, a.reports, a.horizon)
    };
    let report = match a.game {
        AuditGame::RandomizedResponse => audit_epsilon(
            "randomized-response",
            randomized_response(eps, cfg.seed),
            &AuditConfig {
                prefix: 1,
                delta: 0.0,
                target: eps,
                ..base
            },
        )?,
        AuditGame::EchoLeak => {
            audit_epsilon("echo-leak", echo_leak(), &AuditConfig { prefix: 2, ..base })?
        }
        AuditGame::ChallengeAt => {
            let probe = CatProbe {
                params: sparse,
                g: 1,
                neighboring: true,
                seed: cfg.seed,
            };
            audit_epsilon("challenge-at", probe.runner(), &base)?
        }
        AuditGame::Pop => {
            let probe = PopProbe {
                k: a.k,
                reports: a.reports,
                domain: a.domain,
                budget: PrivacyBudget {
                    horizon: a.horizon,
                    ..cfg.budget
                },
                constants: cfg.constants,
                g: 1,
                seed: cfg.seed,
            };
            audit_epsilon("pop", probe.runner()?, &base)?
        }
        AuditGame::Group => {
            let probe = CatProbe {
                params: sparse,
                g: a.g,
                neighboring: false,
                seed: cfg.seed,
            };
            let name = format!("group-challenge-at-g{}", a.g);
            group_privacy_check(
                &name,
                probe.runner(),
                a.g,
                eps,
                cfg.budget.delta,
                c_priv,
                &base,
            )?
        }
    };
    let mut out = Outcome::default();
    out.record("audit", &report)?;
    out.summary = format!(
        "{}: epsilon lower bound {:.4} (point estimate {}), target {} + {}: {:?}",
        report.game,
        report.epsilon_lower,
        report
            .point_estimate
            .map_or("n/a".to_string(), |p| format!("{p:.4}")),
        report.target,
        report.slack,
        report.verdict
    );
    if report.verdict == Verdict::Violation {
        out.violation = Some(format!(
            "{}: lower bound {:.4} exceeds {}",
            report.game,
            report.epsilon_lower,
            report.target + report.slack
        ));
    }
    Ok(out)
}

fn run_ldim(cfg: &ExperimentConfig) -> Result<Outcome> {
    let path = cfg
        .class
        .as_ref()
        .ok_or_else(|| Error::param("ldim needs a class file"))?;
    let class = FiniteHypothesisClass::load(path)?;
    let d = class.ldim();
    let mut out = Outcome::default();
    out.record(
        "ldim",
        &json!({ "class": path, "domain": class.domain_size(), "rows": class.len(), "ldim": d }),
    )?;
    out.summary = d.to_string();
    Ok(out)
}

/// Runs the configured command on a pool of `cfg.workers` threads.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let command = cfg
        .command
        .ok_or_else(|| Error::param("no command given"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::State(e.to_string()))?;
    pool.install(|| match command {
        Command::CounterBench => run_counter_bench(cfg),
        Command::PopRun => run_pop(cfg),
        Command::PopSweep => run_pop_sweep(cfg),
        Command::CoinGame => run_coin(cfg),
        Command::Audit => run_audit(cfg),
        Command::Ldim => run_ldim(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_and_slope() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.0);
        assert_eq!(quantile(&s, 0.95), 4.0);
        assert_eq!(quantile(&s, 0.0), 1.0);
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        assert!((linear_slope(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_counter_is_exact() {
        for t in [1, 7, 64, 1000] {
            assert_eq!(counter_max_error(t, 1.0, 5, false).unwrap(), 0);
        }
    }

    #[test]
    fn pop_with_one_expert_tracks_soa() {
        let class = Arc::new(FiniteHypothesisClass::thresholds(16).unwrap());
        let mut setup = PopSetup::new(
            PrivacyBudget::new(1.0, 1e-5, 0.05, 200),
            Constants::default(),
            StreamStyle::MistakeForcing,
        );
        setup.k = Some(1);
        setup.reports = Some(1_000);
        let (trial, rounds) = pop_trial(&class, &setup, 3, false, true).unwrap();
        assert_eq!(trial.predicted, 200);
        assert!(trial.halted_at.is_none());
        assert!(trial.mistakes >= 1 && trial.mistakes <= class.ldim() as u64);
        assert_eq!(rounds.len(), 200);
    }
}
