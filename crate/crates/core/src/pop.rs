//! The private online predictor (POP), its mistake-capped variant and the
//! agnostic phase-restart wrapper.
//!
//! POP keeps `k` copies of a non-private learner. Each round every copy
//! predicts, ChallengeAT is asked whether the copies disagree a lot, and the
//! released label is either the majority vote or a fair coin. Only one
//! uniformly chosen copy learns the true label.
//!
//! Since deterministic learners predict without side effects, the copies are
//! never duplicated: [`RewindMode::Tally`] keeps, for every domain point, the
//! number of copies voting 1, and only the updated copy's contribution
//! changes. Copies that were never updated share one prototype state.
//! [`RewindMode::Snapshot`] is the literal per-round duplication and is
//! needed for stochastic learners.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::counter::PrivateCounter;
use crate::error::{Error, Result};
use crate::learners::{AgnosticExpert, FiniteHypothesisClass, LabeledExample, OnlineLearner};
use crate::noise::RandomSource;
use crate::params::{Constants, PrivacyBudget};
use crate::sparse::{ChallengeAt, SparseParams};

const CAT_STREAM: u64 = 1;
const SELECT_STREAM: u64 = 2;
const CAP_STREAM: u64 = 3;
const COIN_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewindMode {
    Tally,
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaltCause {
    None,
    CatHalted,
    MistakeCap,
}

/// Smallest odd integer `>= x` (and `>= 1`).
pub fn next_odd_at_least(x: f64) -> usize {
    let c = (x - 1e-9).ceil().max(1.0) as usize;
    if c.is_multiple_of(2) {
        c + 1
    } else {
        c
    }
}

/// Mistake cap for POP_[u,w]: halt once the private mistake count reaches `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapConfig {
    pub u: u64,
    pub w: u64,
    /// Draw `v` uniformly from `[u, w]` instead of using `v = u`.
    pub randomize_v: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopConfig {
    /// Number of expert copies; always odd.
    pub k: usize,
    /// Positive reports before ChallengeAT halts.
    pub reports: u64,
    pub budget: PrivacyBudget,
    pub constants: Constants,
    pub rewind: RewindMode,
    pub cap: Option<CapConfig>,
}

impl PopConfig {
    pub fn new(k: usize, reports: u64, budget: PrivacyBudget, constants: Constants) -> Self {
        Self {
            k,
            reports,
            budget,
            constants,
            rewind: RewindMode::Tally,
            cap: None,
        }
    }

    /// Parameter setting for a learner with mistake bound `d`:
    /// `k` is the next odd integer above
    /// `c_k * max(d/eps^2 * ln^2(1/delta) * ln^2(T/beta), 1/(eps d) * ln T * ln(T/delta))`
    /// and `r = ceil(c_r * (d k + ln(1/beta)))`.
    pub fn for_mistake_bound(d: u32, budget: PrivacyBudget, constants: Constants) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("mistake bound d must be at least 1"));
        }
        budget.validate()?;
        constants.validate()?;
        let (d, eps, t) = (d as f64, budget.epsilon, budget.horizon as f64);
        let ln_delta = (1.0 / budget.delta).ln();
        let ln_tb = (t / budget.beta).ln();
        let stated = d / (eps * eps) * ln_delta.powi(2) * ln_tb.powi(2);
        let counter_term = 1.0 / (eps * d) * t.ln() * (t / budget.delta).ln();
        let k = next_odd_at_least(constants.c_k * stated.max(counter_term));
        let reports = (constants.c_r * (d * k as f64 + (1.0 / budget.beta).ln()) - 1e-9)
            .ceil()
            .max(1.0) as u64;
        Ok(Self::new(k, reports, budget, constants))
    }

    pub fn threshold(&self) -> f64 {
        -(self.k as f64) / 4.0
    }

    pub fn sparse_params(&self) -> SparseParams {
        SparseParams {
            threshold: self.threshold(),
            epsilon: self.budget.epsilon,
            delta: self.budget.delta,
            reports: self.reports,
            sensitivity: 1.0,
            horizon: self.budget.horizon,
            beta: self.budget.beta,
            c_gamma: self.constants.c_gamma,
            c_lambda: self.constants.c_lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k.is_multiple_of(2) {
            return Err(Error::param(format!(
                "k must be odd and positive, got {}",
                self.k
            )));
        }
        if let Some(cap) = self.cap {
            if cap.u == 0 || cap.u >= cap.w {
                return Err(Error::param(format!(
                    "mistake cap needs 0 < u < w, got u={} w={}",
                    cap.u, cap.w
                )));
            }
        }
        self.budget.validate()?;
        self.constants.validate()?;
        self.sparse_params().validate()
    }
}

/// One released round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub i: usize,
    pub x: usize,
    pub prediction: bool,
    pub y: bool,
    pub sigma: bool,
    pub ell: usize,
    pub mistake: bool,
}

/// Outcome of [`Pop::round`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOutcome {
    Predict(bool),
    Halted,
}

#[derive(Debug, Clone)]
struct Pending {
    x: usize,
    ell: usize,
    sigma: bool,
    prediction: bool,
}

#[derive(Debug, Clone)]
enum Pool<L> {
    Tally {
        prototype: L,
        prototype_votes: Vec<bool>,
        updated: HashMap<usize, (L, Vec<bool>)>,
        ones: Vec<u64>,
    },
    Snapshot {
        experts: Vec<L>,
    },
}

impl<L: OnlineLearner> Pool<L> {
    fn new(prototype: L, k: usize, mode: RewindMode) -> Result<Self> {
        match mode {
            RewindMode::Tally => {
                if !prototype.is_deterministic() {
                    return Err(Error::param(
                        "tally rewinding needs a deterministic learner; use snapshot mode",
                    ));
                }
                let prototype_votes = prototype.prediction_vector();
                let ones = prototype_votes
                    .iter()
                    .map(|&b| if b { k as u64 } else { 0 })
                    .collect();
                Ok(Pool::Tally {
                    prototype,
                    prototype_votes,
                    updated: HashMap::new(),
                    ones,
                })
            }
            RewindMode::Snapshot => Ok(Pool::Snapshot {
                experts: vec![prototype; k],
            }),
        }
    }

    fn domain_size(&self) -> usize {
        match self {
            Pool::Tally { prototype, .. } => prototype.domain_size(),
            Pool::Snapshot { experts } => experts[0].domain_size(),
        }
    }

    /// Number of copies predicting 1 on `x`; copy `ell` predicts on itself,
    /// every other copy on a throwaway duplicate.
    fn votes(&mut self, x: usize, ell: usize) -> u64 {
        match self {
            Pool::Tally { ones, .. } => ones[x],
            Pool::Snapshot { experts } => experts
                .iter_mut()
                .enumerate()
                .map(|(j, e)| {
                    let vote = if j == ell {
                        e.predict(x)
                    } else {
                        e.snapshot().predict(x)
                    };
                    vote as u64
                })
                .sum(),
        }
    }

    fn update(&mut self, ell: usize, example: LabeledExample) -> Result<()> {
        match self {
            Pool::Tally {
                prototype,
                prototype_votes,
                updated,
                ones,
            } => {
                let (state, votes) = updated
                    .entry(ell)
                    .or_insert_with(|| (prototype.clone(), prototype_votes.clone()));
                let mut next = state.clone();
                next.update(example)?;
                let next_votes = next.prediction_vector();
                for (x, (&old, &new)) in votes.iter().zip(&next_votes).enumerate() {
                    ones[x] = ones[x] + new as u64 - old as u64;
                }
                *state = next;
                *votes = next_votes;
                Ok(())
            }
            Pool::Snapshot { experts } => experts[ell].update(example),
        }
    }

    fn expert(&self, j: usize) -> L {
        match self {
            Pool::Tally {
                prototype, updated, ..
            } => updated
                .get(&j)
                .map_or_else(|| prototype.clone(), |(s, _)| s.clone()),
            Pool::Snapshot { experts } => experts[j].clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct MistakeCap {
    v: u64,
    counter: PrivateCounter,
}

/// A running POP instance.
#[derive(Debug, Clone)]
pub struct Pop<L> {
    config: PopConfig,
    pool: Pool<L>,
    cat: ChallengeAt,
    select: RandomSource,
    /// Kept apart from `select` so the sequence of chosen copies does not
    /// depend on the sparse-vector answers.
    coin: RandomSource,
    cap: Option<MistakeCap>,
    round: usize,
    pending: Option<Pending>,
    halt: HaltCause,
    mistakes: u64,
    last_votes: u64,
    positives: u64,
    rejected: u64,
}

impl<L: OnlineLearner> Pop<L> {
    /// `prototype` is the initial state shared by all `k` copies.
    pub fn new(config: PopConfig, prototype: L, src: RandomSource) -> Result<Self> {
        config.validate()?;
        let pool = Pool::new(prototype, config.k, config.rewind)?;
        let cat = ChallengeAt::new(config.sparse_params(), src.fork(CAT_STREAM))?;
        let cap = match config.cap {
            None => None,
            Some(c) => {
                let mut cap_src = src.fork(CAP_STREAM);
                let v = if c.randomize_v {
                    c.u + cap_src.below((c.w - c.u + 1) as usize) as u64
                } else {
                    c.u
                };
                let counter =
                    PrivateCounter::new(config.budget.horizon, config.budget.epsilon, cap_src)?;
                Some(MistakeCap { v, counter })
            }
        };
        Ok(Self {
            config,
            pool,
            cat,
            select: src.fork(SELECT_STREAM),
            coin: src.fork(COIN_STREAM),
            cap,
            round: 0,
            pending: None,
            halt: HaltCause::None,
            mistakes: 0,
            last_votes: 0,
            positives: 0,
            rejected: 0,
        })
    }

    pub fn config(&self) -> &PopConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn halt_cause(&self) -> HaltCause {
        self.halt
    }

    pub fn is_halted(&self) -> bool {
        self.halt != HaltCause::None
    }

    /// Completed rounds (prediction released and label received).
    pub fn rounds(&self) -> usize {
        self.round
    }

    pub fn mistakes(&self) -> u64 {
        self.mistakes
    }

    /// Number of copies that voted 1 in the latest round.
    pub fn last_votes(&self) -> u64 {
        self.last_votes
    }

    /// Rounds in which ChallengeAT answered "above threshold".
    /// Examples a copy could not absorb and therefore ignored.
    pub fn rejected_updates(&self) -> u64 {
        self.rejected
    }

    pub fn positive_reports(&self) -> u64 {
        self.positives
    }

    pub fn challenge_at(&self) -> &ChallengeAt {
        &self.cat
    }

    /// The cap value `v` of POP_[u,w], if configured.
    pub fn cap_value(&self) -> Option<u64> {
        self.cap.as_ref().map(|c| c.v)
    }

    /// Largest error of the private mistake counter so far.
    pub fn cap_counter_error(&self) -> Option<u64> {
        self.cap.as_ref().map(|c| c.counter.max_error())
    }

    /// Current state of copy `j`.
    pub fn expert(&self, j: usize) -> L {
        self.pool.expert(j)
    }

    /// Releases a prediction for `x`. Must be followed by exactly one
    /// [`Pop::feed_label`] unless POP halts in this round.
    pub fn round(&mut self, x: usize) -> Result<RoundOutcome> {
        if self.is_halted() {
            return Err(Error::state(format!("POP halted ({:?})", self.halt)));
        }
        if self.pending.is_some() {
            return Err(Error::Protocol(
                "round called while a label is pending".into(),
            ));
        }
        if x >= self.pool.domain_size() {
            return Err(Error::param(format!("domain point {x} out of range")));
        }
        let k = self.config.k;
        let ell = self.select.below(k);
        let votes = self.pool.votes(x, ell);
        self.last_votes = votes;
        let query = -(k as f64 / 2.0 - votes as f64).abs();
        let answer = self.cat.step(query)?;
        self.positives += answer.sigma as u64;
        if answer.halted {
            self.halt = HaltCause::CatHalted;
            return Ok(RoundOutcome::Halted);
        }
        let prediction = if answer.sigma {
            self.coin.fair_coin()
        } else {
            2 * votes > k as u64
        };
        self.pending = Some(Pending {
            x,
            ell,
            sigma: answer.sigma,
            prediction,
        });
        Ok(RoundOutcome::Predict(prediction))
    }

    /// Delivers the true label for the pending round and updates copy `ell`.
    pub fn feed_label(&mut self, y: bool) -> Result<RoundRecord> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("feed_label without a pending round".into()))?;
        // A copy that cannot absorb the example (its version space would
        // become empty) keeps its previous state.
        match self
            .pool
            .update(pending.ell, LabeledExample::new(pending.x, y))
        {
            Ok(()) => {}
            Err(Error::Contract { .. }) => self.rejected += 1,
            Err(e) => return Err(e),
        }
        let mistake = pending.prediction != y;
        self.mistakes += mistake as u64;
        self.round += 1;
        if let Some(cap) = self.cap.as_mut() {
            let count = cap.counter.feed(mistake)?;
            if count >= cap.v {
                self.halt = HaltCause::MistakeCap;
            }
        }
        Ok(RoundRecord {
            i: self.round,
            x: pending.x,
            prediction: pending.prediction,
            y,
            sigma: pending.sigma,
            ell: pending.ell,
            mistake,
        })
    }
}

/// Parameters of the agnostic phase-restart wrapper. With `d = Ldim(H)`:
/// inner learner budget `M* = d ln T`, `k` the next odd integer above
/// `c_k * d^2 / eps`, `r = u = ceil(c_r * k d ln T)` and `w = 2u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgnosticParams {
    pub k: usize,
    pub reports: u64,
    pub u: u64,
    pub w: u64,
    pub inner_budget: f64,
}

impl AgnosticParams {
    pub fn derive(d: u32, budget: &PrivacyBudget, constants: &Constants) -> Result<Self> {
        budget.validate()?;
        constants.validate()?;
        let d = d.max(1) as f64;
        let ln_t = (budget.horizon as f64).ln().max(1.0);
        let k = next_odd_at_least(constants.c_k * d * d / budget.epsilon);
        let u = (constants.c_r * k as f64 * d * ln_t).ceil().max(1.0) as u64;
        Ok(Self {
            k,
            reports: u,
            u,
            w: 2 * u,
            inner_budget: d * ln_t,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub index: usize,
    pub seed: u64,
    /// First stream position handled by this phase.
    pub start: usize,
    /// One past the last stream position handled by this phase.
    pub end: usize,
    pub mistakes: u64,
    pub cause: HaltCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgnosticRun {
    pub params: AgnosticParams,
    pub phases: Vec<PhaseSummary>,
    pub total_mistakes: u64,
}

/// Runs POP_[u,w] phases over `stream`, restarting all mechanism state
/// with a fresh seed after each halt.
///
/// When ChallengeAT halts inside a round, that round's label is released as
/// a fair coin drawn from the run's own stream and the next phase starts at
/// the following example.
pub fn agnostic_pop_run(
    class: &Arc<FiniteHypothesisClass>,
    stream: &[LabeledExample],
    budget: PrivacyBudget,
    constants: Constants,
    src: &RandomSource,
) -> Result<AgnosticRun> {
    let params = AgnosticParams::derive(class.ldim(), &budget, &constants)?;
    let mut config = PopConfig::new(params.k, params.reports, budget, constants);
    config.cap = Some(CapConfig {
        u: params.u,
        w: params.w,
        randomize_v: false,
    });
    let prototype = AgnosticExpert::new(class.clone(), params.inner_budget, budget.horizon)?;
    let mut fallback = src.fork(u64::MAX);
    let mut phases = Vec::new();
    let mut total = 0u64;
    let mut pos = 0;
    loop {
        let index = phases.len();
        let phase_src = src.fork(index as u64);
        let seed = phase_src.seed();
        let mut pop = Pop::new(config.clone(), prototype.clone(), phase_src)?;
        let start = pos;
        let mut mistakes = 0;
        while pos < stream.len() && !pop.is_halted() {
            let ex = stream[pos];
            pos += 1;
            match pop.round(ex.x)? {
                RoundOutcome::Predict(_) => mistakes += pop.feed_label(ex.y)?.mistake as u64,
                RoundOutcome::Halted => mistakes += (fallback.fair_coin() != ex.y) as u64,
            }
        }
        total += mistakes;
        phases.push(PhaseSummary {
            index,
            seed,
            start,
            end: pos,
            mistakes,
            cause: pop.halt_cause(),
        });
        if pos >= stream.len() {
            break;
        }
    }
    Ok(AgnosticRun {
        params,
        phases,
        total_mistakes: total,
    })
}
