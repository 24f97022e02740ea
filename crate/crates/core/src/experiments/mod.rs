//! Drivers behind the `cdp` command line tool: configuration resolution,
//! the experiments themselves and result-file output.

mod commands;
mod config;
mod output;

pub use commands::{
    counter_max_error, linear_slope, pop_trial, quantile, run, run_counter_bench, run_pop_sweep,
    PopSetup, PopTrial,
};
pub use config::{
    AuditGame, AuditSection, CoinSection, Command, CounterSection, ExperimentConfig, Overrides,
    PopSection, SweepSection,
};
pub use output::{Outcome, Series};
