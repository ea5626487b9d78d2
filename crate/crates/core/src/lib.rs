//! Discrete-event simulator for stability-gated, node-disjoint multipath
//! routing in mobile ad hoc networks.
//!
//! Links are admitted to routes by their stability degree (predicted link
//! lifetime over the receiver's energy drain rate). Intermediate nodes keep
//! the best copy of each route request; the destination keeps a greedy,
//! bandwidth-ordered set of node-disjoint paths.

pub mod cli;
pub mod energy;
pub mod engine;
pub mod kinematics;
pub mod protocol;
pub mod report;
pub mod scenario;
pub mod stability;
pub mod trace;

pub type NodeId = u32;

pub use engine::{run, Engine, RunOutput};
pub use report::RunReport;
pub use scenario::{Scenario, ValidationError};
pub use trace::TraceRecord;
