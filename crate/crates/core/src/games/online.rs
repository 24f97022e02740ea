use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{LabeledExample, OnlineLearner};
use crate::pop::{Pop, RoundOutcome};

/// What the adversary sees for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Released {
    Label(bool),
    /// Challenge round: the mechanism's answer is withheld.
    Masked,
    /// The mechanism has halted.
    Halted,
}

impl Released {
    /// Base-4 digit used by the prefix event encoding.
    pub fn code(self) -> u64 {
        match self {
            Released::Label(false) => 0,
            Released::Label(true) => 1,
            Released::Masked => 2,
            Released::Halted => 3,
        }
    }
}

/// The adversary's view of a game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub adversary_seed: u64,
    pub answers: Vec<Released>,
    /// Challenge indicators; part of the view since the adversary's
    /// randomness determines them.
    pub challenges: Vec<bool>,
    /// Set when the released entry was computed from the mechanism's answer.
    /// Never set on challenge rounds.
    pub tainted: Vec<bool>,
}

impl GameTranscript {
    pub fn new(adversary_seed: u64) -> Self {
        Self {
            adversary_seed,
            answers: Vec::new(),
            challenges: Vec::new(),
            tainted: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, answer: Released, challenge: bool, tainted: bool) {
        self.answers.push(answer);
        self.challenges.push(challenge);
        self.tainted.push(tainted);
    }

    /// Encodes the first `k` released answers (padded with `Halted`) as one
    /// discrete outcome.
    pub fn prefix_key(&self, k: usize) -> u64 {
        (0..k).fold(0, |acc, i| {
            let code = self
                .answers
                .get(i)
                .copied()
                .unwrap_or(Released::Halted)
                .code();
            acc * 4 + code
        })
    }

    pub fn extend(&mut self, other: GameTranscript) {
        self.answers.extend(other.answers);
        self.challenges.extend(other.challenges);
        self.tainted.extend(other.tainted);
    }
}

/// A label-prediction mechanism: receives `x`, releases a label (or reports
/// that it halted), then receives the true label.
pub trait OnlineMechanism {
    fn predict(&mut self, x: usize) -> Result<Option<bool>>;
    fn learn(&mut self, y: bool) -> Result<()>;
}

impl<L: OnlineLearner> OnlineMechanism for Pop<L> {
    fn predict(&mut self, x: usize) -> Result<Option<bool>> {
        if self.is_halted() {
            return Ok(None);
        }
        Ok(match self.round(x)? {
            RoundOutcome::Predict(p) => Some(p),
            RoundOutcome::Halted => None,
        })
    }

    fn learn(&mut self, y: bool) -> Result<()> {
        self.feed_label(y).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryMove {
    pub challenge: bool,
    pub inputs: [LabeledExample; 2],
}

impl AdversaryMove {
    pub fn plain(example: LabeledExample) -> Self {
        Self {
            challenge: false,
            inputs: [example, example],
        }
    }

    pub fn challenge(zero: LabeledExample, one: LabeledExample) -> Self {
        Self {
            challenge: true,
            inputs: [zero, one],
        }
    }
}

/// An adaptive adversary for the online game. All of its randomness must
/// derive from [`Adversary::seed`].
pub trait Adversary {
    fn seed(&self) -> u64;
    fn next_move(&mut self, round: usize) -> AdversaryMove;
    fn observe(&mut self, answer: Released);
}

/// Non-adaptive adversary replaying a fixed list of moves.
#[derive(Debug, Clone)]
pub struct ScriptedAdversary {
    seed: u64,
    moves: Vec<AdversaryMove>,
    seen: Vec<Released>,
}

impl ScriptedAdversary {
    pub fn new(seed: u64, moves: Vec<AdversaryMove>) -> Self {
        Self {
            seed,
            moves,
            seen: Vec::new(),
        }
    }

    /// Replays `stream` without challenges.
    pub fn replay(seed: u64, stream: &[LabeledExample]) -> Self {
        Self::new(
            seed,
            stream.iter().map(|&e| AdversaryMove::plain(e)).collect(),
        )
    }

    /// Replays `stream`, but at the 1-based rounds in `challenges` offers
    /// `alternative` as the input under bit 1.
    pub fn probe(
        seed: u64,
        stream: &[LabeledExample],
        challenges: &[usize],
        alternative: LabeledExample,
    ) -> Self {
        let moves = stream
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                if challenges.contains(&(i + 1)) {
                    AdversaryMove::challenge(e, alternative)
                } else {
                    AdversaryMove::plain(e)
                }
            })
            .collect();
        Self::new(seed, moves)
    }

    pub fn observed(&self) -> &[Released] {
        &self.seen
    }
}

impl Adversary for ScriptedAdversary {
    fn seed(&self) -> u64 {
        self.seed
    }

    fn next_move(&mut self, round: usize) -> AdversaryMove {
        self.moves[(round - 1) % self.moves.len()]
    }

    fn observe(&mut self, answer: Released) {
        self.seen.push(answer);
    }
}

pub(crate) fn check_move(
    round: usize,
    mv: &AdversaryMove,
    used: &mut usize,
    g: usize,
) -> Result<()> {
    if mv.challenge {
        *used += 1;
        if *used > g {
            return Err(Error::contract(
                round,
                format!("more than g = {g} challenge rounds"),
            ));
        }
    } else if mv.inputs[0] != mv.inputs[1] {
        return Err(Error::contract(
            round,
            "distinct inputs on a non-challenge round",
        ));
    }
    Ok(())
}

/// Plays the online game for `horizon` rounds with secret bit `b` and at
/// most `g` challenge rounds. The harness, not the mechanism, masks
/// challenge answers.
pub fn run_online_game<M: OnlineMechanism, A: Adversary>(
    mechanism: &mut M,
    adversary: &mut A,
    horizon: usize,
    g: usize,
    b: bool,
) -> Result<GameTranscript> {
    let mut transcript = GameTranscript::new(adversary.seed());
    let mut used = 0;
    let mut halted = false;
    for round in 1..=horizon {
        let mv = adversary.next_move(round);
        check_move(round, &mv, &mut used, g)?;
        let input = mv.inputs[b as usize];
        let answer = if halted {
            None
        } else {
            let a = mechanism.predict(input.x)?;
            match a {
                Some(_) => mechanism.learn(input.y)?,
                None => halted = true,
            }
            a
        };
        let (released, tainted) = if mv.challenge {
            (Released::Masked, false)
        } else {
            match answer {
                Some(label) => (Released::Label(label), true),
                None => (Released::Halted, true),
            }
        };
        transcript.push(released, mv.challenge, tainted);
        adversary.observe(released);
    }
    Ok(transcript)
}

/// The single-challenge adversary built from a `g`-challenge adversary for
/// the `ell`-th hybrid step: bit-1 inputs before the inner adversary's
/// `ell`-th challenge, a real challenge there, and bit-0 inputs afterwards.
/// Answers to the inner adversary's challenge rounds are masked again before
/// being passed on.
#[derive(Debug, Clone)]
pub struct HybridAdversary<A> {
    inner: A,
    ell: usize,
    seen_challenges: usize,
    last_inner_challenge: bool,
}

impl<A: Adversary> HybridAdversary<A> {
    pub fn new(inner: A, ell: usize) -> Self {
        assert!(ell >= 1, "hybrid index starts at 1");
        Self {
            inner,
            ell,
            seen_challenges: 0,
            last_inner_challenge: false,
        }
    }

    pub fn into_inner(self) -> A {
        self.inner
    }
}

impl<A: Adversary> Adversary for HybridAdversary<A> {
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn next_move(&mut self, round: usize) -> AdversaryMove {
        let mv = self.inner.next_move(round);
        self.last_inner_challenge = mv.challenge;
        if mv.challenge {
            self.seen_challenges += 1;
        }
        let [zero, one] = mv.inputs;
        if self.seen_challenges < self.ell {
            AdversaryMove::plain(one)
        } else if mv.challenge && self.seen_challenges == self.ell {
            AdversaryMove::challenge(zero, one)
        } else {
            AdversaryMove::plain(zero)
        }
    }

    fn observe(&mut self, answer: Released) {
        let passed = if self.last_inner_challenge {
            Released::Masked
        } else {
            answer
        };
        self.inner.observe(passed);
    }
}

/// Inputs fed to the mechanism in hybrid `W_ell`: bit-0 inputs once more than
/// `ell` challenges have been posed, bit-1 inputs otherwise.
pub fn hybrid_inputs(moves: &[AdversaryMove], ell: usize) -> Vec<LabeledExample> {
    let mut count = 0;
    moves
        .iter()
        .map(|mv| {
            count += mv.challenge as usize;
            if count > ell {
                mv.inputs[0]
            } else {
                mv.inputs[1]
            }
        })
        .collect()
}
