//! The TPM graph store.
//!
//! Nodes and edges live in slot vectors addressed by [`NodeIx`] / [`EdgeIx`];
//! removal leaves a tombstone so indices handed out earlier stay valid.
//! Every insert goes through the legality and temporal rules below, so a
//! graph built through the public API always satisfies them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{EdgeRecord, EntityId, NodeKind, NodeRecord, Relation, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeIx(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("malformed node `{id}`: {reason}")]
    MalformedNode { id: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownEndpoint(String),
    #[error("illegal relation: {0}")]
    IllegalRelation(String),
    #[error("temporal violation: {0}")]
    TemporalViolation(String),
    #[error("edge {0} would close a causality cycle")]
    CycleIntroduced(String),
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(Timestamp, Timestamp),
    #[error("`{0}` is not a folder or path node")]
    NotAContainer(String),
}

/// Whether `(from, relation, to)` is an allowed combination of node kinds.
pub fn relation_allowed(from: NodeKind, relation: Relation, to: NodeKind) -> bool {
    use NodeKind::*;
    match relation {
        Relation::Used => from == Event && to == ArtifactInstance,
        Relation::WasGeneratedBy => from == ArtifactInstance && to == Event,
        Relation::WasTriggeredBy => from == Event && to == Event,
        Relation::WasDerivedFrom => from == ArtifactInstance && to == ArtifactInstance,
        Relation::WasControlledBy => from == Event && to == AgentInstance,
        Relation::HappenedBefore => {
            from == to && matches!(from, Event | ArtifactInstance | AgentInstance)
        }
        Relation::StartedBefore => from == to && from.is_container(),
        Relation::IsPartOf => to.is_container(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct TpmGraph {
    nodes: Vec<Option<NodeRecord>>,
    edges: Vec<Option<EdgeRecord>>,
    ends: Vec<(NodeIx, NodeIx)>,
    out: Vec<Vec<EdgeIx>>,
    inc: Vec<Vec<EdgeIx>>,
    by_id: HashMap<String, NodeIx>,
    by_triple: HashMap<(NodeIx, Relation, NodeIx), EdgeIx>,
    /// Point nodes (events, artifact and agent instances) per entity.
    instances: HashMap<EntityId, BTreeMap<Timestamp, NodeIx>>,
    live_nodes: usize,
    live_edges: usize,
}

impl TpmGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.live_nodes
    }

    pub fn edge_count(&self) -> usize {
        self.live_edges
    }

    pub fn is_empty(&self) -> bool {
        self.live_nodes == 0
    }

    /// Upper bound (exclusive) of node indices ever handed out.
    pub fn node_bound(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_bound(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeIx, &NodeRecord)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|n| (NodeIx(i), n)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeIx, &EdgeRecord)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (EdgeIx(i), e)))
    }

    pub fn node(&self, ix: NodeIx) -> &NodeRecord {
        self.nodes[ix.0].as_ref().expect("node index refers to a removed node")
    }

    pub fn try_node(&self, ix: NodeIx) -> Option<&NodeRecord> {
        self.nodes.get(ix.0).and_then(Option::as_ref)
    }

    pub fn edge(&self, ix: EdgeIx) -> &EdgeRecord {
        self.edges[ix.0].as_ref().expect("edge index refers to a removed edge")
    }

    pub fn try_edge(&self, ix: EdgeIx) -> Option<&EdgeRecord> {
        self.edges.get(ix.0).and_then(Option::as_ref)
    }

    pub fn ends(&self, ix: EdgeIx) -> (NodeIx, NodeIx) {
        self.ends[ix.0]
    }

    pub fn index_of(&self, id: &str) -> Option<NodeIx> {
        self.by_id.get(id).copied()
    }

    pub fn node_by_id(&self, id: &str) -> Option<&NodeRecord> {
        self.index_of(id).map(|ix| self.node(ix))
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn out_edges(&self, ix: NodeIx) -> &[EdgeIx] {
        &self.out[ix.0]
    }

    pub fn in_edges(&self, ix: NodeIx) -> &[EdgeIx] {
        &self.inc[ix.0]
    }

    pub fn find_edge(&self, from: NodeIx, relation: Relation, to: NodeIx) -> Option<EdgeIx> {
        self.by_triple.get(&(from, relation, to)).copied()
    }

    /// Inserts a node after checking the kind/time combination, id
    /// uniqueness and the one-instance-per-instant rule. Returns the id,
    /// synthesized as `<entity>@<time>` when the record has none.
    pub fn add_node(&mut self, mut node: NodeRecord) -> Result<String, GraphError> {
        if node.id.is_empty() {
            node.id = node.default_id();
        }
        self.check_node(&node)?;
        let id = node.id.clone();
        self.insert_node_unchecked(node);
        Ok(id)
    }

    /// Adds a point instance and links it to the entity's latest earlier
    /// instance with a weighted `happenedBefore`. The new node must be the
    /// entity's latest instance.
    pub fn append_instance(&mut self, node: NodeRecord) -> Result<String, GraphError> {
        let previous = self
            .instances
            .get(&node.entity)
            .and_then(|m| m.iter().next_back())
            .map(|(_, ix)| self.node(*ix).id.clone());
        let id = self.add_node(node)?;
        if let Some(prev) = previous {
            if let Err(e) = self.add_edge(EdgeRecord::new(&prev, Relation::HappenedBefore, &id)) {
                self.remove_node(&id).ok();
                return Err(e);
            }
        }
        Ok(id)
    }

    fn check_node(&self, node: &NodeRecord) -> Result<(), GraphError> {
        let malformed = |reason: &str| GraphError::MalformedNode {
            id: node.id.clone(),
            reason: reason.to_owned(),
        };
        if node.entity.as_str().is_empty() {
            return Err(malformed("empty entity id"));
        }
        if node.kind.is_container() {
            if node.timestamp.is_some() {
                return Err(malformed("folder/path nodes take (start, duration), not a timestamp"));
            }
            if node.start.is_none() || node.duration.is_none() {
                return Err(malformed("folder/path nodes need both start and duration"));
            }
        } else {
            if node.start.is_some() || node.duration.is_some() {
                return Err(malformed("point nodes take a single timestamp, no start/duration"));
            }
            if node.timestamp.is_none() {
                return Err(malformed("point nodes need a timestamp"));
            }
            if node.timed {
                return Err(malformed("only folder/path nodes can be timed"));
            }
        }
        if self.by_id.contains_key(&node.id) {
            return Err(GraphError::DuplicateNodeId(node.id.clone()));
        }
        if let (false, Some(ts)) = (node.kind.is_container(), node.timestamp) {
            if let Some(chain) = self.instances.get(&node.entity) {
                if chain.contains_key(&ts) {
                    return Err(malformed(&format!(
                        "entity `{}` already has an instance at {ts}",
                        node.entity
                    )));
                }
                let before = chain.range(..ts).next_back().map(|(_, ix)| *ix);
                let after = chain.range(ts..).next().map(|(_, ix)| *ix);
                if let (Some(b), Some(a)) = (before, after) {
                    if self.find_edge(b, Relation::HappenedBefore, a).is_some() {
                        return Err(malformed(
                            "would split an existing happenedBefore link between consecutive instances",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn insert_node_unchecked(&mut self, node: NodeRecord) -> NodeIx {
        let ix = NodeIx(self.nodes.len());
        self.by_id.insert(node.id.clone(), ix);
        if let (false, Some(ts)) = (node.kind.is_container(), node.timestamp) {
            self.instances.entry(node.entity.clone()).or_default().insert(ts, ix);
        }
        self.nodes.push(Some(node));
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        self.live_nodes += 1;
        ix
    }

    /// Inserts an edge after checking endpoint kinds, the relation's time
    /// rule and (for causal relations) acyclicity. A missing weight on a
    /// time edge is computed; a present one must match. Re-adding an
    /// identical edge is a no-op returning the existing index.
    pub fn add_edge(&mut self, mut edge: EdgeRecord) -> Result<EdgeIx, GraphError> {
        let from = self
            .index_of(&edge.from)
            .ok_or_else(|| GraphError::UnknownEndpoint(edge.from.clone()))?;
        let to = self
            .index_of(&edge.to)
            .ok_or_else(|| GraphError::UnknownEndpoint(edge.to.clone()))?;
        self.check_edge(from, to, &mut edge)?;
        if let Some(existing) = self.find_edge(from, edge.relation, to) {
            return Ok(existing);
        }
        Ok(self.insert_edge_unchecked(from, to, edge))
    }

    fn check_edge(&self, from: NodeIx, to: NodeIx, edge: &mut EdgeRecord) -> Result<(), GraphError> {
        let a = self.node(from);
        let b = self.node(to);
        let rel = edge.relation;
        if !relation_allowed(a.kind, rel, b.kind) {
            return Err(GraphError::IllegalRelation(format!(
                "{} ({}) -{rel}-> {} ({})",
                a.id, a.kind, b.id, b.kind
            )));
        }
        if edge.weight.is_some() && !rel.is_temporal() {
            return Err(GraphError::IllegalRelation(format!(
                "{rel} edges carry no weight"
            )));
        }
        let violation = |what: String| Err(GraphError::TemporalViolation(format!("{edge}: {what}")));
        let (ta, tb) = (a.time(), b.time());
        match rel {
            Relation::Used => {
                if tb > ta {
                    return violation(format!("artifact instance at {tb} is later than the event at {ta}"));
                }
            }
            Relation::WasGeneratedBy | Relation::WasControlledBy => {
                if ta != tb {
                    return violation(format!("endpoints must share one instant, got {ta} and {tb}"));
                }
            }
            Relation::WasTriggeredBy | Relation::WasDerivedFrom => {
                if ta <= tb {
                    return violation(format!("requires {ta} > {tb}"));
                }
            }
            Relation::HappenedBefore | Relation::StartedBefore => {
                let Some(gap) = tb.since(ta).filter(|g| *g > 0) else {
                    return violation(format!("requires {ta} < {tb}"));
                };
                match edge.weight {
                    Some(w) if w != gap => {
                        return violation(format!("weight {w} differs from the time difference {gap}"));
                    }
                    _ => edge.weight = Some(gap),
                }
                if rel == Relation::HappenedBefore && a.kind != NodeKind::Event {
                    self.check_chain_link(from, to)?;
                }
            }
            Relation::IsPartOf => {
                let (s, e) = b.span();
                let (ms, me) = a.span();
                if ms < s || me > e {
                    return violation(format!(
                        "member span [{ms}, {me}] lies outside container span [{s}, {e}]"
                    ));
                }
                if from == to {
                    return Err(GraphError::IllegalRelation("a node cannot contain itself".into()));
                }
            }
        }
        if rel.is_causal() && ta == tb && self.reaches_causally(to, from, ta) {
            return Err(GraphError::CycleIntroduced(edge.to_string()));
        }
        Ok(())
    }

    /// Instance chains link consecutive instants only, one link per node.
    fn check_chain_link(&self, from: NodeIx, to: NodeIx) -> Result<(), GraphError> {
        let a = self.node(from);
        let b = self.node(to);
        if a.entity != b.entity {
            return Err(GraphError::IllegalRelation(format!(
                "happenedBefore between instances of different entities `{}` and `{}`",
                a.entity, b.entity
            )));
        }
        let chain = &self.instances[&a.entity];
        if chain.range(a.time()..=b.time()).count() != 2 {
            return Err(GraphError::TemporalViolation(format!(
                "{} and {} are not consecutive instances of `{}`",
                a.id, b.id, a.entity
            )));
        }
        let same_link = |e: &EdgeIx| {
            let r = self.edge(*e);
            r.relation == Relation::HappenedBefore
        };
        if self.out[from.0].iter().any(|e| same_link(e) && self.ends(*e).1 != to)
            || self.inc[to.0].iter().any(|e| same_link(e) && self.ends(*e).0 != from)
        {
            return Err(GraphError::IllegalRelation(format!(
                "instance chain of `{}` would branch",
                a.entity
            )));
        }
        Ok(())
    }

    /// Every causal edge points to a node no later than its source, so a
    /// new edge between equal instants can only close a cycle through
    /// nodes stamped at that same instant.
    fn reaches_causally(&self, start: NodeIx, target: NodeIx, at: Timestamp) -> bool {
        let mut stack = vec![start];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            for e in &self.out[n.0] {
                let (_, next) = self.ends[e.0];
                if self.edge(*e).relation.is_causal() && self.node(next).time() == at {
                    stack.push(next);
                }
            }
        }
        false
    }

    fn insert_edge_unchecked(&mut self, from: NodeIx, to: NodeIx, edge: EdgeRecord) -> EdgeIx {
        let ix = EdgeIx(self.edges.len());
        self.by_triple.insert((from, edge.relation, to), ix);
        self.edges.push(Some(edge));
        self.ends.push((from, to));
        self.out[from.0].push(ix);
        self.inc[to.0].push(ix);
        self.live_edges += 1;
        ix
    }

    pub fn remove_edge(&mut self, ix: EdgeIx) -> Option<EdgeRecord> {
        let edge = self.edges.get_mut(ix.0)?.take()?;
        let (from, to) = self.ends[ix.0];
        self.out[from.0].retain(|e| *e != ix);
        self.inc[to.0].retain(|e| *e != ix);
        self.by_triple.remove(&(from, edge.relation, to));
        self.live_edges -= 1;
        Some(edge)
    }

    /// Removes a node together with its incident edges.
    pub fn remove_node(&mut self, id: &str) -> Result<NodeRecord, GraphError> {
        let ix = self
            .index_of(id)
            .ok_or_else(|| GraphError::UnknownEndpoint(id.to_owned()))?;
        let incident: Vec<EdgeIx> = self.out[ix.0].iter().chain(&self.inc[ix.0]).copied().collect();
        for e in incident {
            self.remove_edge(e);
        }
        let node = self.nodes[ix.0].take().expect("indexed node is live");
        self.by_id.remove(id);
        if let (false, Some(ts)) = (node.kind.is_container(), node.timestamp) {
            if let Some(chain) = self.instances.get_mut(&node.entity) {
                chain.remove(&ts);
                if chain.is_empty() {
                    self.instances.remove(&node.entity);
                }
            }
        }
        self.live_nodes -= 1;
        Ok(node)
    }

    pub fn set_attribute(&mut self, id: &str, key: &str, value: &str) -> Result<(), GraphError> {
        let ix = self
            .index_of(id)
            .ok_or_else(|| GraphError::UnknownEndpoint(id.to_owned()))?;
        let node = self.nodes[ix.0].as_mut().expect("indexed node is live");
        node.attributes.insert(key.to_owned(), value.to_owned());
        Ok(())
    }

    /// Moves a container's span. Fails if a current member or a
    /// `startedBefore` neighbour would then violate its time rule.
    pub fn set_span(&mut self, id: &str, start: Timestamp, duration: u64) -> Result<(), GraphError> {
        let ix = self
            .index_of(id)
            .ok_or_else(|| GraphError::UnknownEndpoint(id.to_owned()))?;
        if !self.node(ix).kind.is_container() {
            return Err(GraphError::NotAContainer(id.to_owned()));
        }
        let previous = {
            let node = self.nodes[ix.0].as_mut().expect("indexed node is live");
            let prev = (node.start, node.duration);
            node.start = Some(start);
            node.duration = Some(duration);
            prev
        };
        let incident: Vec<EdgeIx> = self.out[ix.0].iter().chain(&self.inc[ix.0]).copied().collect();
        for e in incident {
            let (f, t) = self.ends(e);
            let mut record = self.edge(e).clone();
            if record.relation.is_temporal() {
                record.weight = None;
            }
            if let Err(err) = self.check_edge(f, t, &mut record) {
                let node = self.nodes[ix.0].as_mut().expect("indexed node is live");
                node.start = previous.0;
                node.duration = previous.1;
                return Err(err);
            }
            self.edges[e.0] = Some(record);
        }
        Ok(())
    }

    /// Point instances of `entity`, oldest first.
    pub fn instances_of(&self, entity: &EntityId) -> Vec<&NodeRecord> {
        self.instances
            .get(entity)
            .map(|chain| chain.values().map(|ix| self.node(*ix)).collect())
            .unwrap_or_default()
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityId> + '_ {
        self.instances.keys()
    }

    /// Sub-graph of nodes whose instant (or span, for containers)
    /// intersects `[from, to]`, with every edge between retained nodes.
    pub fn window(&self, from: Timestamp, to: Timestamp) -> Result<TpmGraph, GraphError> {
        if from > to {
            return Err(GraphError::InvalidInterval(from, to));
        }
        let keep = self.nodes().filter(|(_, n)| {
            let (s, e) = n.span();
            s <= to && e >= from
        });
        Ok(self.induced(keep.map(|(ix, _)| ix)))
    }

    /// Copy of the given nodes plus every edge running between them.
    pub fn induced(&self, nodes: impl IntoIterator<Item = NodeIx>) -> TpmGraph {
        let mut wanted: Vec<NodeIx> = nodes.into_iter().collect();
        wanted.sort();
        wanted.dedup();
        let keep: BTreeSet<NodeIx> = wanted.iter().copied().collect();
        let edges = self
            .edges()
            .filter(|(e, _)| {
                let (f, t) = self.ends(*e);
                keep.contains(&f) && keep.contains(&t)
            })
            .map(|(e, _)| e);
        self.restricted(wanted, edges)
    }

    /// Copy of the given nodes and edges (edge endpoints are added if missing).
    /// The source graph already enforced every rule, so nothing is re-checked.
    pub fn restricted(
        &self,
        nodes: impl IntoIterator<Item = NodeIx>,
        edges: impl IntoIterator<Item = EdgeIx>,
    ) -> TpmGraph {
        let mut sub = TpmGraph::new();
        let mut map: HashMap<NodeIx, NodeIx> = HashMap::new();
        let mut copy_node = |sub: &mut TpmGraph, ix: NodeIx| -> NodeIx {
            *map.entry(ix)
                .or_insert_with(|| sub.insert_node_unchecked(self.node(ix).clone()))
        };
        for ix in nodes {
            copy_node(&mut sub, ix);
        }
        let mut edges: Vec<EdgeIx> = edges.into_iter().collect();
        edges.sort();
        edges.dedup();
        for e in edges {
            let (f, t) = self.ends(e);
            let nf = copy_node(&mut sub, f);
            let nt = copy_node(&mut sub, t);
            sub.insert_edge_unchecked(nf, nt, self.edge(e).clone());
        }
        sub
    }

    /// Nodes linked to `container` by `isPartOf`.
    pub fn members_of(&self, container: NodeIx) -> Vec<NodeIx> {
        let mut members: Vec<NodeIx> = self.inc[container.0]
            .iter()
            .filter(|e| self.edge(**e).relation == Relation::IsPartOf)
            .map(|e| self.ends(*e).0)
            .collect();
        members.sort();
        members
    }

    /// Causal edges a container takes over from its members. They are
    /// derived on every call and never stored.
    pub fn inherited_causal_edges(&self, container: &str) -> Result<Vec<EdgeRecord>, GraphError> {
        let cix = self
            .index_of(container)
            .ok_or_else(|| GraphError::UnknownEndpoint(container.to_owned()))?;
        let c = self.node(cix);
        if !c.kind.is_container() {
            return Err(GraphError::NotAContainer(container.to_owned()));
        }
        let (start, end) = c.span();
        let within = |t: Timestamp| start <= t && t <= end;
        let members: BTreeSet<NodeIx> = self.members_of(cix).into_iter().collect();
        let mut derived = BTreeSet::new();
        for &m in &members {
            for &e in &self.out[m.0] {
                let (_, other) = self.ends(e);
                if members.contains(&other) || other == cix {
                    continue;
                }
                let o = self.node(other);
                let rel = self.edge(e).relation;
                let keep = match rel {
                    Relation::Used | Relation::WasControlledBy => within(o.time()),
                    Relation::WasTriggeredBy => o.time() < start,
                    _ => false,
                };
                if keep {
                    derived.insert(EdgeRecord::new(&c.id, rel, &o.id));
                }
            }
            for &e in &self.inc[m.0] {
                let (other, _) = self.ends(e);
                if members.contains(&other) {
                    continue;
                }
                let o = self.node(other);
                if self.edge(e).relation == Relation::WasGeneratedBy && within(o.time()) {
                    derived.insert(EdgeRecord::new(&o.id, Relation::WasGeneratedBy, &c.id));
                }
            }
        }
        Ok(derived.into_iter().collect())
    }

    /// Nodes sorted by (time, id) and edges sorted; two graphs are equal
    /// exactly when their canonical forms are.
    pub fn canonical(&self) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
        let mut nodes: Vec<NodeRecord> = self.nodes().map(|(_, n)| n.clone()).collect();
        nodes.sort_by(|a, b| (a.time(), &a.id).cmp(&(b.time(), &b.id)));
        let mut edges: Vec<EdgeRecord> = self.edges().map(|(_, e)| e.clone()).collect();
        edges.sort();
        (nodes, edges)
    }

    /// Exhaustive scan of the stored-graph invariants; empty when they hold.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (e, rec) in self.edges() {
            let (f, t) = self.ends(e);
            let (a, b) = (self.node(f), self.node(t));
            if !relation_allowed(a.kind, rec.relation, b.kind) {
                problems.push(format!("illegal edge {rec}"));
            }
            if rec.relation.is_temporal() {
                let gap = b.time().since(a.time());
                if gap.is_none() || gap == Some(0) || gap != rec.weight {
                    problems.push(format!("bad weight on {rec}"));
                }
            }
        }
        for (entity, chain) in &self.instances {
            let ixs: Vec<NodeIx> = chain
                .values()
                .copied()
                .filter(|ix| self.node(*ix).kind != NodeKind::Event)
                .collect();
            for pair in ixs.windows(2) {
                let links = self.out[pair[0].0]
                    .iter()
                    .filter(|e| {
                        self.edge(**e).relation == Relation::HappenedBefore
                            && self.ends(**e).1 == pair[1]
                    })
                    .count();
                if links != 1 {
                    problems.push(format!(
                        "instances {} and {} of `{entity}` are linked {links} times",
                        self.node(pair[0]).id,
                        self.node(pair[1]).id
                    ));
                }
            }
            for ix in &ixs {
                let outgoing = self.out[ix.0]
                    .iter()
                    .filter(|e| self.edge(**e).relation == Relation::HappenedBefore)
                    .count();
                if outgoing > 1 {
                    problems.push(format!("instance chain of `{entity}` branches"));
                }
            }
        }
        if let Some(cycle_edge) = self.find_causal_cycle() {
            problems.push(format!("causality cycle through {cycle_edge}"));
        }
        problems
    }

    fn find_causal_cycle(&self) -> Option<String> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.nodes.len()];
        for (root, _) in self.nodes() {
            if state[root.0] != 0 {
                continue;
            }
            let mut stack: Vec<(NodeIx, usize)> = vec![(root, 0)];
            state[root.0] = 1;
            while let Some((n, pos)) = stack.pop() {
                let causal: Vec<EdgeIx> = self.out[n.0]
                    .iter()
                    .copied()
                    .filter(|e| self.edge(*e).relation.is_causal())
                    .collect();
                if pos < causal.len() {
                    stack.push((n, pos + 1));
                    let e = causal[pos];
                    let next = self.ends(e).1;
                    match state[next.0] {
                        0 => {
                            state[next.0] = 1;
                            stack.push((next, 0));
                        }
                        1 => return Some(self.edge(e).to_string()),
                        _ => {}
                    }
                } else {
                    state[n.0] = 2;
                }
            }
        }
        None
    }

    /// Latest timestamp (or span end) in the graph.
    pub fn max_time(&self) -> Option<Timestamp> {
        self.nodes().map(|(_, n)| n.span().1).max()
    }
}

impl PartialEq for TpmGraph {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for TpmGraph {}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: u64) -> Timestamp {
        Timestamp(n)
    }

    #[test]
    fn add_node_synthesizes_id() {
        let mut g = TpmGraph::new();
        let id = g.add_node(NodeRecord::artifact("Analysis.doc", t(3))).unwrap();
        assert_eq!(id, "Analysis.doc@3");
        assert_eq!(g.node_by_id(&id).unwrap().kind, NodeKind::ArtifactInstance);
    }

    #[test]
    fn event_with_duration_is_malformed() {
        let mut g = TpmGraph::new();
        let mut e = NodeRecord::event("Event-1", t(1));
        e.duration = Some(2);
        assert!(matches!(g.add_node(e), Err(GraphError::MalformedNode { .. })));
        let mut f = NodeRecord::folder("f", t(1), 0);
        f.timestamp = Some(t(1));
        assert!(matches!(g.add_node(f), Err(GraphError::MalformedNode { .. })));
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut g = TpmGraph::new();
        g.add_node(NodeRecord::event("E", t(1)).with_id("x")).unwrap();
        assert_eq!(
            g.add_node(NodeRecord::event("F", t(2)).with_id("x")),
            Err(GraphError::DuplicateNodeId("x".into()))
        );
    }

    #[test]
    fn equal_instant_instances_rejected() {
        let mut g = TpmGraph::new();
        g.add_node(NodeRecord::agent("Alex", t(2)).with_id("a")).unwrap();
        let err = g.add_node(NodeRecord::agent("Alex", t(2)).with_id("b")).unwrap_err();
        assert!(matches!(err, GraphError::MalformedNode { .. }));
    }

    #[test]
    fn used_edge_between_event_and_instance() {
        let mut g = TpmGraph::new();
        let e = g.add_node(NodeRecord::event("Event-6", t(6))).unwrap();
        let a = g.add_node(NodeRecord::artifact("Analysis.doc", t(6))).unwrap();
        g.add_edge(EdgeRecord::new(&e, Relation::Used, &a)).unwrap();
        // wrong direction
        let err = g.add_edge(EdgeRecord::new(&a, Relation::Used, &e)).unwrap_err();
        assert!(matches!(err, GraphError::IllegalRelation(_)));
    }

    #[test]
    fn happened_before_must_go_forward() {
        let mut g = TpmGraph::new();
        let a3 = g.add_node(NodeRecord::artifact("A", t(3))).unwrap();
        let a5 = g.add_node(NodeRecord::artifact("A", t(5))).unwrap();
        let err = g.add_edge(EdgeRecord::new(&a5, Relation::HappenedBefore, &a3)).unwrap_err();
        assert!(matches!(err, GraphError::TemporalViolation(_)));
        let ix = g.add_edge(EdgeRecord::new(&a3, Relation::HappenedBefore, &a5)).unwrap();
        assert_eq!(g.edge(ix).weight, Some(2));
        let bad = EdgeRecord::new(&a3, Relation::HappenedBefore, &a5).weighted(7);
        assert!(matches!(g.add_edge(bad), Err(GraphError::TemporalViolation(_))));
    }

    #[test]
    fn chain_links_only_consecutive_instances() {
        let mut g = TpmGraph::new();
        let a1 = g.add_node(NodeRecord::artifact("A", t(1))).unwrap();
        g.add_node(NodeRecord::artifact("A", t(2))).unwrap();
        let a3 = g.add_node(NodeRecord::artifact("A", t(3))).unwrap();
        let err = g.add_edge(EdgeRecord::new(&a1, Relation::HappenedBefore, &a3)).unwrap_err();
        assert!(matches!(err, GraphError::TemporalViolation(_)));
        let b = g.add_node(NodeRecord::artifact("B", t(4))).unwrap();
        let err = g.add_edge(EdgeRecord::new(&a3, Relation::HappenedBefore, &b)).unwrap_err();
        assert!(matches!(err, GraphError::IllegalRelation(_)));
    }

    #[test]
    fn inserting_inside_a_linked_pair_is_rejected() {
        let mut g = TpmGraph::new();
        g.append_instance(NodeRecord::artifact("A", t(1))).unwrap();
        g.append_instance(NodeRecord::artifact("A", t(5))).unwrap();
        let err = g.add_node(NodeRecord::artifact("A", t(3))).unwrap_err();
        assert!(matches!(err, GraphError::MalformedNode { .. }));
        assert!(g.invariant_violations().is_empty());
    }

    #[test]
    fn derivation_then_reverse_closes_cycle_or_breaks_time() {
        let mut g = TpmGraph::new();
        let a4 = g.add_node(NodeRecord::artifact("A'", t(4))).unwrap();
        let a3 = g.add_node(NodeRecord::artifact("A", t(3))).unwrap();
        g.add_edge(EdgeRecord::new(&a4, Relation::WasDerivedFrom, &a3)).unwrap();
        let err = g.add_edge(EdgeRecord::new(&a3, Relation::WasDerivedFrom, &a4)).unwrap_err();
        assert!(matches!(err, GraphError::TemporalViolation(_)));
    }

    #[test]
    fn equal_instant_cycle_detected() {
        let mut g = TpmGraph::new();
        let e1 = g.add_node(NodeRecord::event("P", t(2))).unwrap();
        let e2 = g.add_node(NodeRecord::event("Q", t(2))).unwrap();
        let a = g.add_node(NodeRecord::artifact("A", t(2))).unwrap();
        let b = g.add_node(NodeRecord::artifact("B", t(2))).unwrap();
        g.add_edge(EdgeRecord::new(&e1, Relation::Used, &a)).unwrap();
        g.add_edge(EdgeRecord::new(&a, Relation::WasGeneratedBy, &e2)).unwrap();
        g.add_edge(EdgeRecord::new(&e2, Relation::Used, &b)).unwrap();
        let err = g.add_edge(EdgeRecord::new(&b, Relation::WasGeneratedBy, &e1)).unwrap_err();
        assert!(matches!(err, GraphError::CycleIntroduced(_)));
    }

    #[test]
    fn unknown_endpoint() {
        let mut g = TpmGraph::new();
        let err = g.add_edge(EdgeRecord::new("x", Relation::Used, "y")).unwrap_err();
        assert_eq!(err, GraphError::UnknownEndpoint("x".into()));
    }

    #[test]
    fn window_point_and_identity() {
        let mut g = TpmGraph::new();
        for i in 1..=4 {
            g.append_instance(NodeRecord::artifact("A", t(i))).unwrap();
        }
        let point = g.window(t(2), t(2)).unwrap();
        assert_eq!(point.node_count(), 1);
        assert_eq!(point.edge_count(), 0);
        assert_eq!(g.window(t(0), g.max_time().unwrap()).unwrap(), g);
        assert_eq!(g.window(t(3), t(2)), Err(GraphError::InvalidInterval(t(3), t(2))));
    }

    #[test]
    fn is_part_of_respects_container_span() {
        let mut g = TpmGraph::new();
        let f = g.add_node(NodeRecord::folder("f", t(3), 3).with_id("f")).unwrap();
        let inside = g.add_node(NodeRecord::event("E", t(4))).unwrap();
        let outside = g.add_node(NodeRecord::event("E", t(8))).unwrap();
        g.add_edge(EdgeRecord::new(&inside, Relation::IsPartOf, &f)).unwrap();
        let err = g.add_edge(EdgeRecord::new(&outside, Relation::IsPartOf, &f)).unwrap_err();
        assert!(matches!(err, GraphError::TemporalViolation(_)));
    }

    #[test]
    fn set_span_rolls_back_on_violation() {
        let mut g = TpmGraph::new();
        let f = g.add_node(NodeRecord::folder("f", t(3), 3).with_id("f")).unwrap();
        let e = g.add_node(NodeRecord::event("E", t(4))).unwrap();
        g.add_edge(EdgeRecord::new(&e, Relation::IsPartOf, &f)).unwrap();
        assert!(g.set_span(&f, t(5), 1).is_err());
        assert_eq!(g.node_by_id(&f).unwrap().span(), (t(3), t(6)));
        g.set_span(&f, t(4), 0).unwrap();
        assert_eq!(g.node_by_id(&f).unwrap().span(), (t(4), t(4)));
    }

    #[test]
    fn inherited_edges_of_empty_folder() {
        let mut g = TpmGraph::new();
        let f = g.add_node(NodeRecord::folder("f", t(0), 0).with_id("f")).unwrap();
        assert!(g.inherited_causal_edges(&f).unwrap().is_empty());
        let e = g.add_node(NodeRecord::event("E", t(1))).unwrap();
        assert_eq!(
            g.inherited_causal_edges(&e),
            Err(GraphError::NotAContainer(e.clone()))
        );
    }

    #[test]
    fn inherited_edge_outside_bound_excluded() {
        let mut g = TpmGraph::new();
        let f = g.add_node(NodeRecord::folder("f", t(3), 2).with_id("f")).unwrap();
        let e4 = g.add_node(NodeRecord::event("P", t(4))).unwrap();
        let old = g.add_node(NodeRecord::artifact("Old", t(1))).unwrap();
        let fresh = g.add_node(NodeRecord::artifact("New", t(4))).unwrap();
        g.add_edge(EdgeRecord::new(&e4, Relation::IsPartOf, &f)).unwrap();
        g.add_edge(EdgeRecord::new(&e4, Relation::Used, &old)).unwrap();
        g.add_edge(EdgeRecord::new(&e4, Relation::Used, &fresh)).unwrap();
        let inherited = g.inherited_causal_edges(&f).unwrap();
        assert_eq!(inherited, vec![EdgeRecord::new("f", Relation::Used, &fresh)]);
    }
}
