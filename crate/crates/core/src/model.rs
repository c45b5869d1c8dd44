//! Node and edge records of a temporal provenance graph.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A logical clock reading. One tick is one abstract time unit.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn ticks(self) -> u64 {
        self.0
    }

    /// Distance from `earlier` to `self`, `None` when `earlier` is later.
    pub fn since(self, earlier: Timestamp) -> Option<u64> {
        self.0.checked_sub(earlier.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl From<u64> for Timestamp {
    fn from(t: u64) -> Self {
        Timestamp(t)
    }
}

impl FromStr for Timestamp {
    type Err = String;

    /// Accepts `12` and `t12`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix('t').unwrap_or(s);
        digits
            .parse::<u64>()
            .map(Timestamp)
            .map_err(|_| format!("invalid timestamp `{s}`"))
    }
}

/// Identity shared by every instance of one logical entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Event,
    ArtifactInstance,
    AgentInstance,
    FolderNode,
    PathNode,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [
        NodeKind::Event,
        NodeKind::ArtifactInstance,
        NodeKind::AgentInstance,
        NodeKind::FolderNode,
        NodeKind::PathNode,
    ];

    /// Folder and path nodes carry a `(start, duration)` span instead of a timestamp.
    pub fn is_container(self) -> bool {
        matches!(self, NodeKind::FolderNode | NodeKind::PathNode)
    }

    /// Short token used by the text formats and by `@type`.
    pub fn token(self) -> &'static str {
        match self {
            NodeKind::Event => "event",
            NodeKind::ArtifactInstance => "artifact",
            NodeKind::AgentInstance => "agent",
            NodeKind::FolderNode => "folder",
            NodeKind::PathNode => "path",
        }
    }

    pub fn from_token(s: &str) -> Option<NodeKind> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.token().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Used,
    WasGeneratedBy,
    WasTriggeredBy,
    WasDerivedFrom,
    WasControlledBy,
    HappenedBefore,
    StartedBefore,
    IsPartOf,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::Used,
        Relation::WasGeneratedBy,
        Relation::WasTriggeredBy,
        Relation::WasDerivedFrom,
        Relation::WasControlledBy,
        Relation::HappenedBefore,
        Relation::StartedBefore,
        Relation::IsPartOf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Used => "used",
            Relation::WasGeneratedBy => "wasGeneratedBy",
            Relation::WasTriggeredBy => "wasTriggeredBy",
            Relation::WasDerivedFrom => "wasDerivedFrom",
            Relation::WasControlledBy => "wasControlledBy",
            Relation::HappenedBefore => "happenedBefore",
            Relation::StartedBefore => "startedBefore",
            Relation::IsPartOf => "isPartOf",
        }
    }

    pub fn from_name(s: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.name() == s)
    }

    /// The four relations the acyclicity invariant ranges over.
    pub fn is_causal(self) -> bool {
        matches!(
            self,
            Relation::Used
                | Relation::WasGeneratedBy
                | Relation::WasTriggeredBy
                | Relation::WasDerivedFrom
        )
    }

    /// Time edges carry a weight and point from the earlier to the later node.
    pub fn is_temporal(self) -> bool {
        matches!(self, Relation::HappenedBefore | Relation::StartedBefore)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A node as handed to (and stored by) [`crate::TpmGraph`].
///
/// Point nodes (events, artifact and agent instances) set `timestamp`;
/// containers set `start` and `duration`. The graph rejects any other
/// combination, so the fields stay optional here to let text loaders
/// report the mistake instead of failing to construct the record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    /// Empty means "synthesize `<entity>@<time>`" on insert.
    pub id: String,
    pub kind: NodeKind,
    pub entity: EntityId,
    pub timestamp: Option<Timestamp>,
    pub start: Option<Timestamp>,
    pub duration: Option<u64>,
    pub attributes: BTreeMap<String, String>,
    pub timed: bool,
}

impl NodeRecord {
    fn point(kind: NodeKind, entity: impl Into<String>, at: Timestamp) -> Self {
        NodeRecord {
            id: String::new(),
            kind,
            entity: EntityId::new(entity),
            timestamp: Some(at),
            start: None,
            duration: None,
            attributes: BTreeMap::new(),
            timed: false,
        }
    }

    pub fn event(entity: impl Into<String>, at: Timestamp) -> Self {
        Self::point(NodeKind::Event, entity, at)
    }

    pub fn artifact(entity: impl Into<String>, at: Timestamp) -> Self {
        Self::point(NodeKind::ArtifactInstance, entity, at)
    }

    pub fn agent(entity: impl Into<String>, at: Timestamp) -> Self {
        Self::point(NodeKind::AgentInstance, entity, at)
    }

    pub fn container(
        kind: NodeKind,
        entity: impl Into<String>,
        start: Timestamp,
        duration: u64,
    ) -> Self {
        NodeRecord {
            id: String::new(),
            kind,
            entity: EntityId::new(entity),
            timestamp: None,
            start: Some(start),
            duration: Some(duration),
            attributes: BTreeMap::new(),
            timed: false,
        }
    }

    pub fn folder(entity: impl Into<String>, start: Timestamp, duration: u64) -> Self {
        Self::container(NodeKind::FolderNode, entity, start, duration)
    }

    pub fn path(entity: impl Into<String>, start: Timestamp, duration: u64) -> Self {
        Self::container(NodeKind::PathNode, entity, start, duration)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn with_timed(mut self, timed: bool) -> Self {
        self.timed = timed;
        self
    }

    /// `[first, last]` instant covered by the node. For a malformed
    /// record this falls back to whichever field is present.
    pub fn span(&self) -> (Timestamp, Timestamp) {
        match (self.timestamp, self.start) {
            (Some(t), _) => (t, t),
            (None, Some(s)) => (s, Timestamp(s.0 + self.duration.unwrap_or(0))),
            (None, None) => (Timestamp(0), Timestamp(0)),
        }
    }

    /// Timestamp of a point node, start of a container.
    pub fn time(&self) -> Timestamp {
        self.span().0
    }

    pub fn default_id(&self) -> String {
        format!("{}@{}", self.entity, self.time().0)
    }
}

/// A stored edge. `weight` is only present on time edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub relation: Relation,
    pub to: String,
    pub weight: Option<u64>,
}

impl EdgeRecord {
    pub fn new(from: impl Into<String>, relation: Relation, to: impl Into<String>) -> Self {
        EdgeRecord {
            from: from.into(),
            relation,
            to: to.into(),
            weight: None,
        }
    }

    pub fn weighted(mut self, weight: u64) -> Self {
        self.weight = Some(weight);
        self
    }
}

impl fmt::Display for EdgeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -{}-> {}", self.from, self.relation, self.to)?;
        if let Some(w) = self.weight {
            write!(f, " ({w})")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_parses_both_spellings() {
        assert_eq!("t3".parse::<Timestamp>().unwrap(), Timestamp(3));
        assert_eq!("17".parse::<Timestamp>().unwrap(), Timestamp(17));
        assert!("tx".parse::<Timestamp>().is_err());
        assert_eq!(Timestamp(6).since(Timestamp(3)), Some(3));
        assert_eq!(Timestamp(3).since(Timestamp(6)), None);
    }

    #[test]
    fn relation_names_round_trip() {
        for r in Relation::ALL {
            assert_eq!(Relation::from_name(r.name()), Some(r));
        }
        assert_eq!(Relation::from_name("caused"), None);
    }

    #[test]
    fn container_span_covers_duration() {
        let f = NodeRecord::folder("p", Timestamp(3), 3);
        assert_eq!(f.span(), (Timestamp(3), Timestamp(6)));
        assert_eq!(NodeRecord::event("e", Timestamp(2)).span(), (Timestamp(2), Timestamp(2)));
    }
}
