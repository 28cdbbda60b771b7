//! Sequential social dilemmas on a grid with peer incentives, plus independent
//! Q-learners whose incentive heads can be regularized toward similar agents.

pub mod env;
pub mod log;
pub mod maps;
pub mod marl;
pub mod xmeans;

pub use env::{EnvAction, EnvConfig, EnvError, GameKind, IncentiveKind, SsdEnv};
