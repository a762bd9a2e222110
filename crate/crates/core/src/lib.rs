//! Seeded simulator of cooperative agent swarms that keep track of each
//! other by messaging over lossy links.
//!
//! * [`continuum`]: rate-equation model and its closed-form steady states.
//! * [`engine`]: the discrete stochastic tick loop.
//! * [`tactics`]: pluggable target-selection strategies, looked up by name.
//! * [`metrics`]: performance, connectedness, risk and link-count measures.
//! * [`envgen`]: link-efficiency environments.
//! * [`experiment`]: run/sweep/ensemble drivers and their artifacts.

pub mod continuum;
pub mod engine;
pub mod envgen;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tactics;

pub use engine::{Observer, TickReport, World};
pub use error::{ConfigError, ContinuumError, Error, MetricsError};
pub use model::{AgentId, BeliefMatrix, CommLog, Environment, Message, SimParams, Tick};
pub use rng::{Purpose, RngContract, StreamRng};
pub use tactics::{Tactic, TacticConfig, TacticRegistry};
