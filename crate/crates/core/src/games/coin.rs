use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noise::RandomSource;

/// State visible to a coin-game strategy before it picks its biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinGameState {
    pub budget: i64,
    pub reward: u64,
    pub round: usize,
    /// Outcome of the previous flip (0, 1 or 2), `None` before the first.
    pub last: Option<u8>,
}

pub trait CoinStrategy {
    /// Returns `(p, q)` for the coming flip.
    fn choose(&mut self, state: &CoinGameState) -> (f64, f64);
}

/// Always plays the most rewarding legal biases, `p = 5/6`, `q = 1/6`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl CoinStrategy for Greedy {
    fn choose(&mut self, _state: &CoinGameState) -> (f64, f64) {
        (5.0 / 6.0, 1.0 / 6.0)
    }
}

/// Greedy until a single unit of budget is left, then plays low-probability
/// coins so the last unit lasts many rounds.
#[derive(Debug, Clone, Copy)]
pub struct Cautious {
    pub p_last: f64,
}

impl Default for Cautious {
    fn default() -> Self {
        Self { p_last: 0.05 }
    }
}

impl CoinStrategy for Cautious {
    fn choose(&mut self, state: &CoinGameState) -> (f64, f64) {
        if state.budget <= 1 {
            (self.p_last, self.p_last / 5.0)
        } else {
            (5.0 / 6.0, 1.0 / 6.0)
        }
    }
}

/// Switches between a bold and a timid coin after every budget loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct Alternating {
    timid: bool,
}

impl CoinStrategy for Alternating {
    fn choose(&mut self, state: &CoinGameState) -> (f64, f64) {
        if state.last == Some(2) {
            self.timid = !self.timid;
        }
        if self.timid {
            (0.25, 0.05)
        } else {
            (5.0 / 6.0, 1.0 / 6.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinStrategy {
    Greedy,
    Cautious,
    Alternating,
}

impl BuiltinStrategy {
    pub const ALL: [BuiltinStrategy; 3] = [Self::Greedy, Self::Cautious, Self::Alternating];

    pub fn build(self) -> Box<dyn CoinStrategy> {
        match self {
            Self::Greedy => Box::new(Greedy),
            Self::Cautious => Box::new(Cautious::default()),
            Self::Alternating => Box::new(Alternating::default()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Cautious => "cautious",
            Self::Alternating => "alternating",
        }
    }
}

impl FromStr for BuiltinStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown coin strategy `{s}`")))
    }
}

/// `exp(-lambda / 6 + 3 (k + 1))`, capped at 1.
pub fn coin_tail_bound(k: u64, lambda: f64) -> f64 {
    (-lambda / 6.0 + 3.0 * (k as f64 + 1.0)).exp().min(1.0)
}

fn check_biases(round: usize, p: f64, q: f64) -> Result<()> {
    const EPS: f64 = 1e-12;
    let ok = p.is_finite()
        && q.is_finite()
        && (0.0..=5.0 / 6.0 + EPS).contains(&p)
        && q >= p / 5.0 - EPS
        && q <= 1.0 - p + EPS;
    if ok {
        Ok(())
    } else {
        Err(Error::contract(
            round,
            format!("invalid coin biases p = {p}, q = {q}"),
        ))
    }
}

/// Plays `m` rounds against `strategy` with starting budget `k` and returns
/// the reward. Once the budget is exhausted the reward can no longer change,
/// so the remaining rounds are skipped.
pub fn run_coin_game<S: CoinStrategy + ?Sized>(
    strategy: &mut S,
    k: u64,
    m: usize,
    src: &mut RandomSource,
) -> Result<u64> {
    let mut state = CoinGameState {
        budget: k as i64,
        reward: 0,
        round: 0,
        last: None,
    };
    for round in 1..=m {
        if state.budget <= 0 {
            break;
        }
        state.round = round;
        let (p, q) = strategy.choose(&state);
        check_biases(round, p, q)?;
        let u = src.uniform();
        let x = if u < p {
            1
        } else if u < p + q {
            2
        } else {
            0
        };
        if x == 1 && state.budget > 0 {
            state.reward += 1;
        } else if x == 2 {
            state.budget -= 1;
        }
        state.last = Some(x);
    }
    Ok(state.reward)
}
