//! Annotated OPM causality graphs.

mod parse;
pub mod timeline;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

pub use parse::{parse_opm, parse_opm_bytes, serialize_opm, OpmParseError};
pub use validate::{validate_opm, Issue, IssueKind, Severity, ValidationReport};

use crate::model::{NodeKind, Relation, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpmKind {
    Artifact,
    Process,
    Agent,
}

impl OpmKind {
    pub fn token(self) -> &'static str {
        match self {
            OpmKind::Artifact => "artifact",
            OpmKind::Process => "process",
            OpmKind::Agent => "agent",
        }
    }

    pub fn from_token(s: &str) -> Option<OpmKind> {
        [OpmKind::Artifact, OpmKind::Process, OpmKind::Agent]
            .into_iter()
            .find(|k| k.token().eq_ignore_ascii_case(s))
    }

    /// Kind of the TPM nodes this entity expands into.
    pub fn tpm_kind(self) -> NodeKind {
        match self {
            OpmKind::Artifact => NodeKind::ArtifactInstance,
            OpmKind::Process => NodeKind::Event,
            OpmKind::Agent => NodeKind::AgentInstance,
        }
    }
}

impl fmt::Display for OpmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// The five OPM dependencies; the time and aggregation relations are TPM-only.
pub fn is_opm_relation(r: Relation) -> bool {
    r.is_causal() || r == Relation::WasControlledBy
}

/// Endpoint kinds each OPM relation accepts.
pub fn opm_endpoints(r: Relation) -> Option<(OpmKind, OpmKind)> {
    use OpmKind::*;
    Some(match r {
        Relation::Used => (Process, Artifact),
        Relation::WasGeneratedBy => (Artifact, Process),
        Relation::WasTriggeredBy => (Process, Process),
        Relation::WasDerivedFrom => (Artifact, Artifact),
        Relation::WasControlledBy => (Process, Agent),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpmNode {
    pub id: String,
    pub kind: OpmKind,
    pub attributes: BTreeMap<String, String>,
}

impl OpmNode {
    pub fn new(id: impl Into<String>, kind: OpmKind) -> Self {
        OpmNode {
            id: id.into(),
            kind,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }
}

/// A causal dependency. `time` is the interaction instant; on
/// `wasDerivedFrom` it is the derived artifact's instant and `source_time`
/// pins the instant of the artifact it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpmEdge {
    pub from: String,
    pub relation: Relation,
    pub to: String,
    pub time: Option<Timestamp>,
    pub source_time: Option<Timestamp>,
    pub attributes: BTreeMap<String, String>,
}

impl OpmEdge {
    pub fn new(from: impl Into<String>, relation: Relation, to: impl Into<String>) -> Self {
        OpmEdge {
            from: from.into(),
            relation,
            to: to.into(),
            time: None,
            source_time: None,
            attributes: BTreeMap::new(),
        }
    }

    pub fn at(mut self, t: u64) -> Self {
        self.time = Some(Timestamp(t));
        self
    }

    pub fn from_source_at(mut self, t: u64) -> Self {
        self.source_time = Some(Timestamp(t));
        self
    }
}

impl fmt::Display for OpmEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.from, self.relation, self.to)?;
        if let Some(t) = self.time {
            write!(f, " at {t}")?;
        }
        Ok(())
    }
}

/// Nodes and edges in insertion order; node ids are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpmGraph {
    pub nodes: Vec<OpmNode>,
    pub edges: Vec<OpmEdge>,
    index: BTreeMap<String, usize>,
}

impl OpmGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node; returns `false` (and changes nothing) on a duplicate id.
    pub fn add_node(&mut self, node: OpmNode) -> bool {
        if self.index.contains_key(&node.id) {
            return false;
        }
        self.index.insert(node.id.clone(), self.nodes.len());
        self.nodes.push(node);
        true
    }

    /// Edges are stored unchecked; see [`validate_opm`].
    pub fn add_edge(&mut self, edge: OpmEdge) {
        self.edges.push(edge);
    }

    pub fn node(&self, id: &str) -> Option<&OpmNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn count(&self, kind: OpmKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    /// `"4 artifacts, 6 processes, 4 agents"`.
    pub fn summary(&self) -> String {
        let plural = |n: usize, one: &str, many: &str| {
            format!("{n} {}", if n == 1 { one } else { many })
        };
        format!(
            "{}, {}, {}",
            plural(self.count(OpmKind::Artifact), "artifact", "artifacts"),
            plural(self.count(OpmKind::Process), "process", "processes"),
            plural(self.count(OpmKind::Agent), "agent", "agents"),
        )
    }
}
