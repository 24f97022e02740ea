use std::sync::Arc;

use super::{FiniteHypothesisClass, LabeledExample, OnlineLearner};
use crate::error::{Error, Result};

/// Deterministic weighted majority over the rows of a finite class.
///
/// Every row starts with weight 1 and is multiplied by `beta` on each
/// mistake, with `beta = 1 / (1 + sqrt(2 ln|H| / max(M*, 1)))` tuned to the
/// mistake budget `M*` of the best row. Each row is the SOA run on its own
/// singleton version space, so this is multiplicative weights over
/// restarting experts; the loss is `O(M* + ln|H|)` and `ln|H| <= d ln(n+1)`
/// for a class of Littlestone dimension `d` over `n` points.
///
/// The state is the vector of per-row mistake counts, so equal histories
/// give equal states.
#[derive(Debug, Clone)]
pub struct AgnosticExpert {
    class: Arc<FiniteHypothesisClass>,
    mistakes: Vec<u32>,
    beta: f64,
    budget: f64,
    horizon: usize,
}

impl AgnosticExpert {
    pub fn new(class: Arc<FiniteHypothesisClass>, budget: f64, horizon: usize) -> Result<Self> {
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::param(format!(
                "mistake budget must be non-negative, got {budget}"
            )));
        }
        if horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        let ln_size = (class.len() as f64).ln();
        let beta = 1.0 / (1.0 + (2.0 * ln_size / budget.max(1.0)).sqrt());
        Ok(Self {
            mistakes: vec![0; class.len()],
            class,
            beta,
            budget,
            horizon,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn row_mistakes(&self) -> &[u32] {
        &self.mistakes
    }

    pub fn predict_pure(&self, x: usize) -> bool {
        let floor = self.mistakes.iter().copied().min().unwrap_or(0);
        let (mut w0, mut w1) = (0.0, 0.0);
        for (h, &m) in self.mistakes.iter().enumerate() {
            let w = self.beta.powi((m - floor) as i32);
            if self.class.label(h, x) {
                w1 += w;
            } else {
                w0 += w;
            }
        }
        w1 >= w0
    }
}

impl PartialEq for AgnosticExpert {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.class, &other.class)
            && self.beta == other.beta
            && self.mistakes == other.mistakes
    }
}

impl OnlineLearner for AgnosticExpert {
    fn domain_size(&self) -> usize {
        self.class.domain_size()
    }

    fn predict(&mut self, x: usize) -> bool {
        self.predict_pure(x)
    }

    fn update(&mut self, example: LabeledExample) -> Result<()> {
        if example.x >= self.class.domain_size() {
            return Err(Error::param(format!(
                "domain point {} out of range",
                example.x
            )));
        }
        for (h, m) in self.mistakes.iter_mut().enumerate() {
            if self.class.label(h, example.x) != example.y {
                *m += 1;
            }
        }
        Ok(())
    }

    fn prediction_vector(&self) -> Vec<bool> {
        (0..self.domain_size())
            .map(|x| self.predict_pure(x))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{corrupt_labels, make_realizable_stream, optimal_mistakes, StreamStyle};
    use crate::noise::RandomSource;

    fn run(class: &Arc<FiniteHypothesisClass>, budget: f64, stream: &[LabeledExample]) -> usize {
        let mut learner = AgnosticExpert::new(class.clone(), budget, stream.len().max(1)).unwrap();
        stream
            .iter()
            .filter(|ex| {
                let wrong = learner.predict(ex.x) != ex.y;
                learner.update(**ex).unwrap();
                wrong
            })
            .count()
    }

    // Calibrated constant for loss <= C * (OPT + d ln T) on the threshold
    // class; the weighted-majority bound gives roughly 2.6 here.
    const C: f64 = 3.0;

    #[test]
    fn realizable_stream_loss() {
        let class = Arc::new(FiniteHypothesisClass::thresholds(64).unwrap());
        let d = class.ldim() as f64;
        let mut src = RandomSource::new(31);
        for h in [0, 20, 40, 64] {
            let t = 2000;
            let s =
                make_realizable_stream(&class, h, t, StreamStyle::UniformRandom, &mut src).unwrap();
            let loss = run(&class, 0.0, &s) as f64;
            assert!(loss <= C * d * (t as f64).ln(), "h={h} loss={loss}");
        }
    }

    #[test]
    fn planted_flips_loss() {
        let class = Arc::new(FiniteHypothesisClass::thresholds(64).unwrap());
        let d = class.ldim() as f64;
        let mut src = RandomSource::new(32);
        let t = 3000;
        for m in [10, 50, 200] {
            let clean = make_realizable_stream(&class, 30, t, StreamStyle::UniformRandom, &mut src)
                .unwrap();
            let (noisy, _) = corrupt_labels(&clean, m, &mut src).unwrap();
            let opt = optimal_mistakes(&class, &noisy) as f64;
            assert!(opt <= m as f64);
            let loss = run(&class, m as f64, &noisy) as f64;
            assert!(
                loss <= C * (m as f64 + d * (t as f64).ln()),
                "m={m} loss={loss}"
            );
        }
    }

    #[test]
    fn constant_label_stream() {
        let class = Arc::new(FiniteHypothesisClass::thresholds(64).unwrap());
        let all_ones = 0;
        assert!(class.row(all_ones).iter().all(|&b| b));
        let mut src = RandomSource::new(33);
        let s = make_realizable_stream(&class, all_ones, 1000, StreamStyle::RoundRobin, &mut src)
            .unwrap();
        let loss = run(&class, 0.0, &s) as f64;
        assert!(loss <= C * 6.0 * 1000f64.ln());
    }

    #[test]
    fn rejects_negative_budget() {
        let class = Arc::new(FiniteHypothesisClass::full(2).unwrap());
        assert!(AgnosticExpert::new(class, -1.0, 10).is_err());
    }
}
