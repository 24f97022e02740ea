use super::online::{run_online_game, Adversary, GameTranscript, OnlineMechanism};
use crate::error::{Error, Result};

/// Epsilon of the m-fold composition of `(eps, delta)` games at slack
/// `delta_prime`: `sqrt(2 m ln(1/delta')) eps + m eps (e^eps - 1)`.
pub fn composed_epsilon(epsilon: f64, m: usize, delta_prime: f64) -> f64 {
    let m = m as f64;
    (2.0 * m * (1.0 / delta_prime).ln()).sqrt() * epsilon + m * epsilon * epsilon.exp_m1()
}

/// One sub-game chosen by the meta adversary.
pub struct SubGame<M, A> {
    pub mechanism: M,
    pub adversary: A,
    pub horizon: usize,
}

/// Runs the sub-games produced by `meta` in order, all under the same bit.
/// `meta` sees every earlier transcript before choosing the next game.
pub fn run_composition_game<M, A, F>(m: usize, b: bool, mut meta: F) -> Result<Vec<GameTranscript>>
where
    M: OnlineMechanism,
    A: Adversary,
    F: FnMut(usize, &[GameTranscript]) -> Result<SubGame<M, A>>,
{
    if m == 0 {
        return Err(Error::param("composition needs at least one game"));
    }
    let mut views = Vec::with_capacity(m);
    for index in 0..m {
        let mut game = meta(index, &views)?;
        let t = run_online_game(&mut game.mechanism, &mut game.adversary, game.horizon, 1, b)?;
        views.push(t);
    }
    Ok(views)
}

/// Concatenates sub-game views into one transcript.
pub fn concatenate(views: Vec<GameTranscript>) -> GameTranscript {
    let mut iter = views.into_iter();
    let mut out = iter.next().unwrap_or_else(|| GameTranscript::new(0));
    for v in iter {
        out.extend(v);
    }
    out
}
