//! Adversary games, the coin game and the empirical privacy auditor.

pub mod audit;
pub mod cat_game;
pub mod coin;
pub mod composition;
pub mod online;

pub use audit::{audit_epsilon, group_privacy_check, AuditConfig, AuditReport, Verdict};
pub use cat_game::{run_challenge_at_game, QueryAdversary, QueryMove, ScriptedQueries};
pub use coin::{coin_tail_bound, run_coin_game, BuiltinStrategy, CoinGameState, CoinStrategy};
pub use composition::{composed_epsilon, concatenate, run_composition_game, SubGame};
pub use online::{
    hybrid_inputs, run_online_game, Adversary, AdversaryMove, GameTranscript, HybridAdversary,
    OnlineMechanism, Released, ScriptedAdversary,
};
