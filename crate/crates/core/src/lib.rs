//! Stateless public-goods games with punishment and homophily.
//!
//! The crate is organised bottom-up:
//!
//! * [`game`] defines the game family, realized payoffs and an enumeration oracle
//!   for expected values.
//! * [`analytics`] holds the closed-form value gradients and related evaluators.
//! * [`dynamics`] integrates the projected gradient flow, classifies basins and
//!   estimates cooperative volumes.
//! * [`geometry`] maps population points to ternary and quaternary plot coordinates.
//! * [`reinforce`] trains independent REINFORCE learners on the stateless game.
//! * [`schelling`] builds Schelling-diagram payoff curves.

pub mod analytics;
pub mod dynamics;
pub mod game;
pub mod geometry;
pub mod reinforce;
pub mod schelling;

pub use analytics::GradientVector;
pub use dynamics::{BasinLabel, FlowParams, Trajectory};
pub use game::{GameError, GameSpec, OutcomeCounts, PolicyProfile, Strategy, Variant};
