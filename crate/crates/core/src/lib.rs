//! Lyapunov-based spectrum sharing and energy management for green
//! small-cell networks.

pub mod allocator;
pub mod baselines;
pub mod channel;
pub mod controller;
pub mod engine;
pub mod oracle;
pub mod pairing;
pub mod queues;
pub mod scenario;
pub mod stochastic;
pub mod units;

pub use baselines::PolicyKind;
pub use scenario::{load_config, ConfigError, Scenario};
pub use units::Energy;
