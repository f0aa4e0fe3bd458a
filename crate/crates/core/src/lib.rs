//! Learning the transition structure of an unknown controllable Markov chain
//! (CMC) by informative exploration.
//!
//! A learner sees the true chain only through [`Cmc::sample_transition`]. It
//! keeps a [`CountTensor`] of observed transitions, estimates the chain with a
//! symmetric Dirichlet posterior mean, and chooses where to explore next by
//! maximising predicted information gain (PIG): greedily, jointly over state
//! and control, or by rollout planning over a finite horizon. Learned models
//! are compared by solving a discounted cost task on each estimate and
//! scoring the resulting policy under the true chain.
//!
//! States and controls are 0-based everywhere. The two-state benchmark's
//! "state one" is index 0 and its "control one" is index 0.

pub mod cmc;
pub mod control;
mod error;
pub mod estimation;
pub mod exploration;
pub mod harness;
pub mod rng;

pub use cmc::{Cmc, Transitions};
pub use control::{DiscountedTask, StationaryPolicy, ValueFunction};
pub use error::{Error, Result};
pub use estimation::{CountTensor, DirichletPrior};
pub use exploration::{ExplorationLog, ExplorationRecord, RolloutConfig, StrategyKind};
pub use rng::RngStream;
