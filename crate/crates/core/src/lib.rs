//! Discrete-time simulator of a cognitive-radio disaster-response network.
//!
//! The network has four node roles: surviving primary-radio (PR) devices of a
//! partially destroyed infrastructure, cognitive-radio (CR) devices that relay
//! on their behalf, fixed multi-radio mesh routers (CMRs), and an Internet
//! portal acting as the sink.
//!
//! Module map:
//!
//! - [`spectrum`]: channels, per-slot PR activity, sensing.
//! - [`topology`]: node placement and the unit-disk neighbor relation.
//! - [`strategy`]: channel selection (SURF-like and random) and the CMR
//!   opportunity map.
//! - [`protocol`]: per-slot node behavior, the broadcast medium and the event log.
//! - [`engine`]: phase orchestration, metrics, replication and sweeps.
//! - [`config`]: the flat `key = value` experiment configuration format.

pub mod config;
pub mod engine;
pub mod error;
pub mod ids;
pub mod protocol;
pub mod rng;
pub mod spectrum;
pub mod strategy;
pub mod topology;

pub use config::{ExperimentConfig, Mode, Occupancy};
pub use engine::{run, sweep, RunMetrics, SweepRow, SweepTable};
pub use error::{Error, Result};
pub use ids::{ChannelId, NodeId, Slot};
pub use strategy::{MapMode, StrategyKind};
pub use topology::{Deployment, Node, Point, Role};
