//! Discrete-time simulator and protocol library for hierarchical beacon
//! routing over mobile wireless networks whose connectivity graphs have
//! bounded doubling dimension.
//!
//! The crate is split along the pipeline of a run: [`geometry`] places
//! nodes, [`mobility`] moves them, [`graph`] and [`topology`] turn positions
//! into connectivity graphs, [`protocol`] runs beaconing and forwarding on
//! each graph, and [`harness`] drives runs and experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod mobility;
pub mod protocol;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};

/// Node identifier, dense in `0..n`.
pub type NodeId = u32;
