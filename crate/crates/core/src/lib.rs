//! Challenge differential privacy for online classification.
//!
//! * [`noise`]: seeded randomness and Laplace sampling.
//! * [`counter`]: the binary-tree private counter.
//! * [`sparse`]: AboveThreshold and ChallengeAT.
//! * [`learners`]: finite classes, Littlestone dimension, SOA, Halving and
//!   an agnostic weighted-majority learner.
//! * [`pop`]: the private online predictor, its mistake-capped variant and
//!   the agnostic phase-restart wrapper.
//! * [`games`]: adversary games, the coin game and the empirical privacy
//!   auditor.
//! * [`experiments`]: the drivers behind the `cdp` command line tool.

pub mod counter;
pub mod error;
pub mod experiments;
pub mod games;
pub mod learners;
pub mod noise;
pub mod params;
pub mod pop;
pub mod sparse;

pub use error::{Error, Result};
