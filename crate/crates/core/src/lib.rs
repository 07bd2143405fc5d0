//! Round-synchronous simulator of uniform-power ad hoc wireless networks
//! under SINR reception, with deterministic broadcast and leader-election
//! protocols and an experiment harness for their round-complexity
//! scaling.
//!
//! Organization:
//! - [`geometry`]: grids, box coordinates, dilution classes, granularity.
//! - [`sinr`]: the physical layer — SINR ratios, reception models,
//!   communication graphs, eccentricity.
//! - [`selectors`]: strongly-selective families and derived constants.
//! - [`runtime`]: the synchronous round engine, traces and audits.
//! - [`protocols`]: diluted transmission, leader election (granularity-
//!   dependent and general) and the staged broadcast algorithms.
//! - [`harness`]: network generators, experiments, file formats.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod protocols;
pub mod runtime;
pub mod selectors;
pub mod sinr;

pub use error::{Error, Result};
pub use geometry::{box_of, granularity, BoxCoord, Point};
pub use runtime::{BcastState, NodeState, PhaseTag, RoundRecord, SelState, Simulator, TraceSink};
pub use selectors::{build_ssf, elimination_k, verify_ssf, Ssf};
pub use sinr::{
    default_id_domain, effective_eps, CommGraph, DisturbanceModel, Eccentricity, Network,
    Reception, ReceptionModel, SinrEngine, SinrParams, Station, StationId,
};
