//! Adaptive packet-routing simulation core.
//!
//! Builds unit-delay network graphs, routes packets with a shortest-path
//! baseline, Q-Routing or confidence-based Q-Routing, and steps a
//! deterministic discrete-time simulation with per-node FIFO queues.
//! Everything here is `no_std` (with `alloc`); file formats, experiment
//! orchestration and the command line live in the `qrouting` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod curve;
pub mod engine;
pub mod policy;
pub mod topology;

pub use curve::{aggregate_curves, settling_step, CurveError, CurvePoint, LearningCurve};
pub use engine::{
    run, DeliveryRecord, EngineError, LinkChange, Packet, RunOutput, SimConfig, Simulation,
    StepReport, TopologyEvent, Traffic,
};
pub use policy::{
    init_policy, Feedback, LearningParams, Policy, PolicyError, PolicyKind, RoutingPolicy, TieBreak,
};
pub use topology::{build_irregular_grid_6x6, NodeId, Topology, TopologyError};
