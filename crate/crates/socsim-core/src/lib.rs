//! Event-driven simulator for growing directed social networks.
//!
//! Agents join, follow, post, and rebroadcast; every action is a Poisson
//! process and the engine advances with the Gillespie direct method, so
//! inter-event times are exact rather than time-stepped. See
//! [`sim::SimulationState`] for the step loop, [`config::SimulationConfig`]
//! for the TOML surface, and [`experiments`] for packaged scenario drivers.

pub mod agents;
pub mod checkpoint;
pub mod config;
pub mod diffusion;
pub mod experiments;
pub mod graph;
pub mod omega;
pub mod output;
pub mod rate_tree;
pub mod rng;
pub mod sim;
pub mod stats;

pub use agents::{Agent, AgentId, AgentTypeProfile, AttributeSpace, ContentClass};
pub use checkpoint::{load, save, CheckpointError};
pub use config::{ConfigError, SimulationConfig};
pub use diffusion::{Broadcast, BroadcastId, Cascade, DiffusionState, TrendingBuffer};
pub use graph::{DegreeFlavor, FollowModel, Network};
pub use omega::OmegaTable;
pub use output::write_outputs;
pub use rate_tree::RateTree;
pub use rng::SimRng;
pub use sim::{Counters, EventCategory, EventRecord, RunStop, SimulationState, StepResult};
pub use stats::{fit_power_law, ks_distance, poisson_pmf, DegreeHistogram, PowerLawFit};
