use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FiniteHypothesisClass, LabeledExample, OnlineLearner, Soa};
use crate::error::{Error, Result};
use crate::noise::RandomSource;

/// How the domain points of a realizable stream are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamStyle {
    UniformRandom,
    RoundRobin,
    /// Greedy against SOA over the same class: whenever some point would
    /// make SOA err, pick one of those uniformly; otherwise a uniform point.
    MistakeForcing,
}

impl std::str::FromStr for StreamStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-random" => Ok(Self::UniformRandom),
            "round-robin" => Ok(Self::RoundRobin),
            "mistake-forcing" => Ok(Self::MistakeForcing),
            _ => Err(Error::Parse(format!("unknown stream style `{s}`"))),
        }
    }
}

fn check_target(class: &FiniteHypothesisClass, h: usize) -> Result<()> {
    if h >= class.len() {
        return Err(Error::param(format!(
            "hypothesis index {h} out of range for class of size {}",
            class.len()
        )));
    }
    Ok(())
}

/// A stream of `length` examples labeled by row `h` of `class`.
pub fn make_realizable_stream(
    class: &Arc<FiniteHypothesisClass>,
    h: usize,
    length: usize,
    style: StreamStyle,
    src: &mut RandomSource,
) -> Result<Vec<LabeledExample>> {
    check_target(class, h)?;
    let n = class.domain_size();
    match style {
        StreamStyle::UniformRandom => Ok((0..length)
            .map(|_| {
                let x = src.below(n);
                LabeledExample::new(x, class.label(h, x))
            })
            .collect()),
        StreamStyle::RoundRobin => Ok((0..length)
            .map(|i| LabeledExample::new(i % n, class.label(h, i % n)))
            .collect()),
        StreamStyle::MistakeForcing => {
            make_forcing_stream(class, h, length, Soa::new(class.clone()), src)
        }
    }
}

/// Greedy mistake-forcing stream against a copy of `learner`.
pub fn make_forcing_stream<L: OnlineLearner>(
    class: &Arc<FiniteHypothesisClass>,
    h: usize,
    length: usize,
    mut learner: L,
    src: &mut RandomSource,
) -> Result<Vec<LabeledExample>> {
    check_target(class, h)?;
    let n = class.domain_size();
    let mut out = Vec::with_capacity(length);
    let mut exhausted = false;
    for _ in 0..length {
        let x = if exhausted {
            src.below(n)
        } else {
            let preds = learner.prediction_vector();
            let wrong: Vec<usize> = (0..n).filter(|&x| preds[x] != class.label(h, x)).collect();
            if wrong.is_empty() {
                exhausted = learner.is_deterministic();
                src.below(n)
            } else {
                wrong[src.below(wrong.len())]
            }
        };
        let ex = LabeledExample::new(x, class.label(h, x));
        if !exhausted {
            learner.update(ex)?;
        }
        out.push(ex);
    }
    Ok(out)
}

/// Flips the labels at `m` distinct random positions. Returns the new stream
/// and the flipped positions in increasing order.
pub fn corrupt_labels(
    stream: &[LabeledExample],
    m: usize,
    src: &mut RandomSource,
) -> Result<(Vec<LabeledExample>, Vec<usize>)> {
    if m > stream.len() {
        return Err(Error::param(format!(
            "cannot flip {m} labels in a stream of length {}",
            stream.len()
        )));
    }
    let mut positions: Vec<usize> = (0..stream.len()).collect();
    for i in 0..m {
        let j = i + src.below(stream.len() - i);
        positions.swap(i, j);
    }
    let mut flipped = positions[..m].to_vec();
    flipped.sort_unstable();
    let mut out = stream.to_vec();
    for &p in &flipped {
        out[p].y = !out[p].y;
    }
    Ok((out, flipped))
}

/// Mistakes of the best row of `class` on `stream`.
pub fn optimal_mistakes(class: &FiniteHypothesisClass, stream: &[LabeledExample]) -> usize {
    (0..class.len())
        .map(|h| {
            stream
                .iter()
                .filter(|ex| class.label(h, ex.x) != ex.y)
                .count()
        })
        .min()
        .unwrap_or(0)
}
