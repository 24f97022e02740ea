use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::BuiltinStrategy;
use crate::learners::StreamStyle;
use crate::params::{Constants, PrivacyBudget};
use crate::pop::RewindMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CounterBench,
    PopRun,
    PopSweep,
    CoinGame,
    Audit,
    Ldim,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CounterBench => "counter-bench",
            Command::PopRun => "pop-run",
            Command::PopSweep => "pop-sweep",
            Command::CoinGame => "coin-game",
            Command::Audit => "audit",
            Command::Ldim => "ldim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterSection {
    pub horizons: Vec<usize>,
}

impl Default for CounterSection {
    fn default() -> Self {
        Self {
            horizons: (6..=14).map(|e| 1 << e).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopSection {
    /// Domain size of the threshold class used when no class file is given.
    pub domain: usize,
    pub style: StreamStyle,
    /// Overrides for the derived number of experts and positive reports.
    pub k: Option<usize>,
    pub reports: Option<u64>,
    pub rewind: RewindMode,
    /// Label flips planted into the stream.
    pub corruptions: usize,
    /// Run the agnostic phase-restart wrapper instead of plain POP.
    pub agnostic: bool,
}

impl Default for PopSection {
    fn default() -> Self {
        Self {
            domain: 64,
            style: StreamStyle::MistakeForcing,
            k: None,
            reports: None,
            rewind: RewindMode::Tally,
            corruptions: 0,
            agnostic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    /// Threshold-class domain sizes; nested classes with growing dimension.
    pub domains: Vec<usize>,
    /// Horizons to sweep; empty means the budget's horizon only.
    pub horizons: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.5, 1.0, 2.0],
            domains: vec![4, 16, 64],
            horizons: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoinSection {
    pub strategy: BuiltinStrategy,
    /// Constant biases `[p, q]` used instead of `strategy` when set.
    pub fixed: Option<[f64; 2]>,
    pub k: u64,
    pub m: usize,
    pub lambdas: Vec<f64>,
}

impl Default for CoinSection {
    fn default() -> Self {
        Self {
            strategy: BuiltinStrategy::Greedy,
            fixed: None,
            k: 5,
            m: 10_000,
            lambdas: vec![40.0, 60.0, 80.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditGame {
    /// One-round randomized response at the budget's epsilon.
    RandomizedResponse,
    /// A mechanism that echoes the challenge label one round later.
    EchoLeak,
    /// The ChallengeAT game with a single far-apart challenge.
    ChallengeAt,
    /// The online game on POP with SOA experts.
    Pop,
    /// The ChallengeAT game with `g` challenges, checked against the group bound.
    Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub game: AuditGame,
    pub prefix: usize,
    pub confidence: f64,
    pub slack: f64,
    pub g: usize,
    pub k: usize,
    pub reports: u64,
    pub domain: usize,
    pub horizon: usize,
    pub threshold: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            game: AuditGame::RandomizedResponse,
            prefix: 4,
            confidence: 0.95,
            slack: 0.0,
            g: 2,
            k: 5,
            reports: 4,
            domain: 8,
            horizon: 16,
            threshold: 0.0,
        }
    }
}

/// Fully resolved configuration; echoed into every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub class: Option<PathBuf>,
    pub seed: u64,
    pub trials: u64,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub no_noise: bool,
    pub out: Option<PathBuf>,
    pub budget: PrivacyBudget,
    pub constants: Constants,
    pub counter: CounterSection,
    pub pop: PopSection,
    pub sweep: SweepSection,
    pub coin: CoinSection,
    pub audit: AuditSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            class: None,
            seed: 0,
            trials: 100,
            workers: 0,
            no_noise: false,
            out: None,
            budget: PrivacyBudget::default(),
            constants: Constants::default(),
            counter: CounterSection::default(),
            pop: PopSection::default(),
            sweep: SweepSection::default(),
            coin: CoinSection::default(),
            audit: AuditSection::default(),
        }
    }
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub workers: Option<usize>,
    pub no_noise: bool,
    pub out: Option<PathBuf>,
    pub class: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Applies the subcommand and flag overrides, then validates.
    pub fn resolve(mut self, command: Command, flags: Overrides) -> Result<Self> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::param(format!(
                    "config file is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.command = Some(command);
        if let Some(v) = flags.seed {
            self.seed = v;
        }
        if let Some(v) = flags.trials {
            self.trials = v;
        }
        if let Some(v) = flags.workers {
            self.workers = v;
        }
        if flags.no_noise {
            self.no_noise = true;
        }
        if flags.out.is_some() {
            self.out = flags.out;
        }
        if flags.class.is_some() {
            self.class = flags.class;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        self.constants.validate()?;
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if self.counter.horizons.contains(&0) {
            return Err(Error::param("counter horizons must be positive"));
        }
        if self
            .sweep
            .epsilons
            .iter()
            .any(|&e| !(e > 0.0 && e.is_finite()))
        {
            return Err(Error::param("sweep epsilons must be positive"));
        }
        if self.pop.domain == 0 || self.sweep.domains.contains(&0) {
            return Err(Error::param("domain sizes must be positive"));
        }
        if self.command == Some(Command::Ldim) && self.class.is_none() {
            return Err(Error::param("ldim needs a class file (--class PATH)"));
        }
        Ok(())
    }

    pub fn source(&self, seed: u64) -> crate::noise::RandomSource {
        crate::noise::RandomSource::with_noise(seed, !self.no_noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let file =
            ExperimentConfig::from_toml("seed = 7\ntrials = 3\n[budget]\nepsilon = 2.0\n").unwrap();
        assert_eq!(file.budget.delta, PrivacyBudget::default().delta);
        let cfg = file
            .resolve(
                Command::CounterBench,
                Overrides {
                    seed: Some(9),
                    ..Overrides::default()
                },
            )
            .unwrap();
        assert_eq!((cfg.seed, cfg.trials, cfg.budget.epsilon), (9, 3, 2.0));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig {
            command: Some(Command::PopSweep),
            ..ExperimentConfig::default()
        };
        assert_eq!(
            ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(),
            cfg
        );
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml("sead = 1").is_err());
        let bad = ExperimentConfig::from_toml("[budget]\nepsilon = -1.0").unwrap();
        assert!(bad.resolve(Command::Audit, Overrides::default()).is_err());
        let other = ExperimentConfig::from_toml("command = \"audit\"").unwrap();
        assert!(other.resolve(Command::Ldim, Overrides::default()).is_err());
    }
}
