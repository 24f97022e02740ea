//! Privacy budget and the named constants that stand in for hidden
//! asymptotic factors. Every experiment output records both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub horizon: usize,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, beta: f64, horizon: usize) -> Self {
        Self {
            epsilon,
            delta,
            beta,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        Ok(())
    }
}

impl Default for PrivacyBudget {
    fn default() -> Self {
        Self::new(1.0, 1e-5, 0.05, 10_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    /// Multiplier on the sparse-vector noise scale.
    pub c_gamma: f64,
    /// Multiplier on the counter error allowance lambda.
    pub c_lambda: f64,
    /// Multiplier on the number of expert copies k.
    pub c_k: f64,
    /// Multiplier on the number of positive reports r (and the cap u).
    pub c_r: f64,
    /// Audit target multiplier: games are expected to be (c_priv * eps)-DP.
    pub c_priv: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c_gamma: 1.0,
            c_lambda: 1.0,
            c_k: 1.0,
            c_r: 1.0,
            c_priv: 4.0,
        }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_gamma", self.c_gamma),
            ("c_k", self.c_k),
            ("c_r", self.c_r),
            ("c_priv", self.c_priv),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.c_lambda >= 0.0 && self.c_lambda.is_finite()) {
            return Err(Error::param("c_lambda must be non-negative"));
        }
        Ok(())
    }
}
