use std::sync::Arc;

use super::{FiniteHypothesisClass, LabeledExample, OnlineLearner, RowSet};
use crate::error::{Error, Result};
use crate::noise::RandomSource;

fn shrink(class: &FiniteHypothesisClass, version: &mut RowSet, ex: LabeledExample) -> Result<()> {
    if ex.x >= class.domain_size() {
        return Err(Error::param(format!("domain point {} out of range", ex.x)));
    }
    let next = class.restrict(version, ex.x, ex.y);
    if next.is_empty() {
        return Err(Error::contract(
            0,
            format!(
                "example ({}, {}) empties the version space",
                ex.x, ex.y as u8
            ),
        ));
    }
    *version = next;
    Ok(())
}

/// Littlestone's Standard Optimal Algorithm.
///
/// Predicts the label whose restriction of the version space has the larger
/// Littlestone dimension; ties go to 1.
#[derive(Debug, Clone)]
pub struct Soa {
    class: Arc<FiniteHypothesisClass>,
    version: RowSet,
}

impl Soa {
    pub fn new(class: Arc<FiniteHypothesisClass>) -> Self {
        let version = class.all_rows();
        Self { class, version }
    }

    pub fn version_space(&self) -> &RowSet {
        &self.version
    }

    fn score(&self, x: usize, y: bool) -> i64 {
        let restricted = self.class.restrict(&self.version, x, y);
        if restricted.is_empty() {
            -1
        } else {
            self.class.ldim_of(&restricted) as i64
        }
    }

    pub fn predict_pure(&self, x: usize) -> bool {
        self.score(x, true) >= self.score(x, false)
    }
}

impl PartialEq for Soa {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.class, &other.class) && self.version == other.version
    }
}

impl OnlineLearner for Soa {
    fn domain_size(&self) -> usize {
        self.class.domain_size()
    }

    fn predict(&mut self, x: usize) -> bool {
        self.predict_pure(x)
    }

    fn update(&mut self, example: LabeledExample) -> Result<()> {
        shrink(&self.class, &mut self.version, example)
    }

    fn prediction_vector(&self) -> Vec<bool> {
        (0..self.domain_size())
            .map(|x| self.predict_pure(x))
            .collect()
    }
}

/// The Halving algorithm: majority vote of the surviving rows, ties to 1.
#[derive(Debug, Clone)]
pub struct Halving {
    class: Arc<FiniteHypothesisClass>,
    version: RowSet,
}

impl Halving {
    pub fn new(class: Arc<FiniteHypothesisClass>) -> Self {
        let version = class.all_rows();
        Self { class, version }
    }

    pub fn version_space(&self) -> &RowSet {
        &self.version
    }

    pub fn predict_pure(&self, x: usize) -> bool {
        let ones = self.class.count_ones_at(&self.version, x);
        2 * ones >= self.version.len()
    }
}

impl PartialEq for Halving {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.class, &other.class) && self.version == other.version
    }
}

impl OnlineLearner for Halving {
    fn domain_size(&self) -> usize {
        self.class.domain_size()
    }

    fn predict(&mut self, x: usize) -> bool {
        self.predict_pure(x)
    }

    fn update(&mut self, example: LabeledExample) -> Result<()> {
        shrink(&self.class, &mut self.version, example)
    }
}

/// Predicts 1 with probability equal to the fraction of surviving rows that
/// label `x` with 1. Each prediction consumes one draw of internal randomness.
#[derive(Debug, Clone)]
pub struct RandomizedHalving {
    class: Arc<FiniteHypothesisClass>,
    version: RowSet,
    src: RandomSource,
}

impl RandomizedHalving {
    pub fn new(class: Arc<FiniteHypothesisClass>, src: RandomSource) -> Self {
        let version = class.all_rows();
        Self {
            class,
            version,
            src,
        }
    }

    pub fn version_space(&self) -> &RowSet {
        &self.version
    }

    /// Draws consumed by `predict` so far.
    pub fn draws(&self) -> u64 {
        self.src.draws()
    }
}

impl PartialEq for RandomizedHalving {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.class, &other.class)
            && self.version == other.version
            && self.src.seed() == other.src.seed()
            && self.src.draws() == other.src.draws()
    }
}

impl OnlineLearner for RandomizedHalving {
    fn domain_size(&self) -> usize {
        self.class.domain_size()
    }

    fn predict(&mut self, x: usize) -> bool {
        let ones = self.class.count_ones_at(&self.version, x) as f64;
        self.src.bernoulli(ones / self.version.len() as f64)
    }

    fn update(&mut self, example: LabeledExample) -> Result<()> {
        shrink(&self.class, &mut self.version, example)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
