//! Independent learners with an environment Q-network and a pairwise incentive head.

pub mod losses;
pub mod net;
pub mod trainer;

pub use losses::{incentive_objective, loss_environment, loss_homophily, loss_incentive, LossConfig, Transition};
pub use net::{Adam, Approximator, Mlp};
pub use trainer::{
    env_similarity, select_env_action, select_incentives, EpisodeMetrics, EpisodeRecord, IterationMetrics, ReplayBuffer,
    RunSummary, TrainConfig, TrainError, Trainer,
};
