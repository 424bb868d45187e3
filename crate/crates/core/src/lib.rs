//! Monte-Carlo simulation of multihop routing in finite ad hoc networks.
//!
//! Link outages are evaluated in closed form for integer Nakagami fading
//! conditioned on the exact node geometry, and a layered simulation
//! (topology, role marking, per-slot interferer sets, per-slot outage draws)
//! drives three routing protocols: AODV, greedy forwarding and maximum
//! progress. Per-topology metrics are averaged into reliability, delay, hop
//! count and area spectral efficiency figures.

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod outage;
pub mod protocols;
pub mod report;
pub mod seed;
pub mod topology;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use experiment::{run_experiment, ResultTable};
pub use topology::Topology;
