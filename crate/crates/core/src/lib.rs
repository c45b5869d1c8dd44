//! Temporal provenance graphs.
//!
//! [`TpmGraph`] stores per-instant entity instances and timed folder/path
//! containers. [`opm`] reads annotated OPM graphs and [`convert`] turns them
//! into TPM form. [`query`] parses the folder/path query language and
//! [`Engine`] evaluates it, keeping materialized containers current through
//! [`agents`].

pub mod agents;
pub mod convert;
pub mod engine;
pub mod eval;
pub mod graph;
pub mod lineformat;
pub mod model;
pub mod native;
pub mod opm;
pub mod query;
pub mod reachability;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use graph::{EdgeIx, GraphError, NodeIx, TpmGraph};
pub use model::{EdgeRecord, EntityId, NodeKind, NodeRecord, Relation, Timestamp};
pub use agents::{AgentMode, AgentRegistration, EvolutionDelta};
pub use engine::{Engine, MaterializedNode, Outcome};
