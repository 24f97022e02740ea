use serde::{Deserialize, Serialize};

use super::online::{GameTranscript, Released};
use crate::error::{Error, Result};
use crate::noise::RandomSource;
use crate::sparse::{ChallengeAt, SparseParams};

/// One round of the ChallengeAT game. A query evaluates to
/// `offsets[b] + dataset[b]`; outside challenge rounds both offsets must be
/// equal, so the query is a single function with sensitivity bounded by the
/// dataset distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMove {
    pub challenge: bool,
    pub offsets: [f64; 2],
}

impl QueryMove {
    pub fn plain(offset: f64) -> Self {
        Self {
            challenge: false,
            offsets: [offset, offset],
        }
    }

    pub fn challenge(zero: f64, one: f64) -> Self {
        Self {
            challenge: true,
            offsets: [zero, one],
        }
    }
}

pub trait QueryAdversary {
    fn seed(&self) -> u64;
    /// The two neighboring datasets, summarized by the value they add to
    /// every query.
    fn datasets(&mut self) -> [f64; 2];
    fn next_query(&mut self, round: usize) -> QueryMove;
    fn observe(&mut self, answer: Released);
}

/// Non-adaptive query adversary.
#[derive(Debug, Clone)]
pub struct ScriptedQueries {
    pub seed: u64,
    pub datasets: [f64; 2],
    pub moves: Vec<QueryMove>,
}

impl QueryAdversary for ScriptedQueries {
    fn seed(&self) -> u64 {
        self.seed
    }

    fn datasets(&mut self) -> [f64; 2] {
        self.datasets
    }

    fn next_query(&mut self, round: usize) -> QueryMove {
        self.moves[(round - 1) % self.moves.len()]
    }

    fn observe(&mut self, _answer: Released) {}
}

/// Plays the ChallengeAT game for `params.horizon` rounds with at most `g`
/// challenges. Rounds after halting are released as `Halted`.
pub fn run_challenge_at_game<A: QueryAdversary>(
    adversary: &mut A,
    params: SparseParams,
    g: usize,
    b: bool,
    src: RandomSource,
) -> Result<GameTranscript> {
    let datasets = adversary.datasets();
    if (datasets[0] - datasets[1]).abs() > params.sensitivity {
        return Err(Error::contract(0, "datasets are not neighboring"));
    }
    let mut cat = ChallengeAt::new(params, src)?;
    let mut transcript = GameTranscript::new(adversary.seed());
    let mut used = 0;
    for round in 1..=params.horizon {
        let mv = adversary.next_query(round);
        if mv.challenge {
            used += 1;
            if used > g {
                return Err(Error::contract(
                    round,
                    format!("more than g = {g} challenge rounds"),
                ));
            }
        } else if mv.offsets[0] != mv.offsets[1] {
            return Err(Error::contract(
                round,
                "distinct queries on a non-challenge round",
            ));
        }
        let answer = if cat.is_halted() {
            None
        } else {
            Some(
                cat.step(mv.offsets[b as usize] + datasets[b as usize])?
                    .sigma,
            )
        };
        let released = match (mv.challenge, answer) {
            (true, _) => Released::Masked,
            (false, Some(sigma)) => Released::Label(sigma),
            (false, None) => Released::Halted,
        };
        transcript.push(released, mv.challenge, !mv.challenge);
        adversary.observe(released);
    }
    Ok(transcript)
}
