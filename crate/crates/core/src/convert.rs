//! OPM to TPM conversion.
//!
//! Artifacts and agents become one instance per interaction instant, chained
//! by weighted `happenedBefore` edges. Processes become events grouped into
//! `process` folders; consecutive events of a folder are chained, and
//! consecutive folders sharing a `process_type` are linked by
//! `startedBefore`. Finally every OPM dependency is re-attached between the
//! instances the timeline plan assigned to it.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::graph::{GraphError, TpmGraph};
use crate::model::{EdgeRecord, NodeKind, NodeRecord, Relation, Timestamp};
use crate::opm::timeline::{self, Plan};
use crate::opm::{OpmGraph, OpmKind, ValidationReport};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversionReport {
    pub artifact_instances_created: usize,
    pub agent_instances_created: usize,
    pub events_created: usize,
    pub folders_created: usize,
    pub happened_before_edges: usize,
    pub started_before_edges: usize,
    pub causal_edges: usize,
    pub warnings: Vec<String>,
}

impl ConversionReport {
    fn rows(&self) -> [(&'static str, usize); 7] {
        [
            ("artifact instances", self.artifact_instances_created),
            ("agent instances", self.agent_instances_created),
            ("events", self.events_created),
            ("folders", self.folders_created),
            ("happenedBefore edges", self.happened_before_edges),
            ("startedBefore edges", self.started_before_edges),
            ("causal edges", self.causal_edges),
        ]
    }
}

impl fmt::Display for ConversionReport {
    /// Aligned two-column table followed by any warnings.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.rows();
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v:>6}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConversionError {
    #[error("OPM graph failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("conversion broke a graph invariant: {0}")]
    Graph(#[from] GraphError),
}

/// Folder node id for a process-instance label.
pub fn folder_id(group: &str) -> String {
    format!("process:{group}")
}

fn instances(
    opm: &OpmGraph,
    times: &BTreeMap<String, std::collections::BTreeSet<Timestamp>>,
    kind: OpmKind,
) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (entity, ts) in times {
        let attrs = opm.node(entity).map(|n| n.attributes.clone()).unwrap_or_default();
        let mut previous: Option<(String, Timestamp)> = None;
        for &t in ts {
            let mut node = match kind {
                OpmKind::Artifact => NodeRecord::artifact(entity.as_str(), t),
                _ => NodeRecord::agent(entity.as_str(), t),
            };
            node.attributes = attrs.clone();
            node.id = node.default_id();
            if let Some((prev, pt)) = previous.take() {
                edges.push(EdgeRecord::new(prev, Relation::HappenedBefore, &node.id).weighted(t.0 - pt.0));
            }
            previous = Some((node.id.clone(), t));
            nodes.push(node);
        }
    }
    (nodes, edges)
}

fn process_parts(opm: &OpmGraph, plan: &Plan) -> (Vec<NodeRecord>, Vec<EdgeRecord>, Vec<String>) {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut warnings = Vec::new();
    let mut by_type: BTreeMap<String, Vec<(Timestamp, String)>> = BTreeMap::new();
    for (group, procs) in &plan.groups {
        let mut events: Vec<NodeRecord> = Vec::new();
        for p in procs {
            let attrs = opm.node(p).map(|n| n.attributes.clone()).unwrap_or_default();
            for &t in &plan.processes[p] {
                let mut e = NodeRecord::event(p.as_str(), t);
                e.attributes = attrs.clone();
                e.id = e.default_id();
                events.push(e);
            }
        }
        events.sort_by(|a, b| (a.time(), &a.id).cmp(&(b.time(), &b.id)));
        let (first, last) = (events[0].time(), events[events.len() - 1].time());
        let fid = folder_id(group);
        let mut folder = NodeRecord::folder(group.as_str(), first, last.0 - first.0)
            .with_id(fid.clone())
            .with_attr("type", "process");
        let process_type = procs
            .iter()
            .find_map(|p| opm.node(p).and_then(|n| n.attributes.get("process_type")));
        if let Some(pt) = process_type {
            folder = folder.with_attr("process_type", pt.as_str());
            by_type.entry(pt.clone()).or_default().push((first, fid.clone()));
        }
        for pair in events.windows(2) {
            edges.push(
                EdgeRecord::new(&pair[0].id, Relation::HappenedBefore, &pair[1].id)
                    .weighted(pair[1].time().0 - pair[0].time().0),
            );
        }
        for e in &events {
            edges.push(EdgeRecord::new(&e.id, Relation::IsPartOf, &fid));
        }
        nodes.extend(events);
        nodes.push(folder);
    }
    for (pt, mut folders) in by_type {
        folders.sort();
        for pair in folders.windows(2) {
            let ((s0, f0), (s1, f1)) = (&pair[0], &pair[1]);
            if s1 > s0 {
                edges.push(EdgeRecord::new(f0, Relation::StartedBefore, f1).weighted(s1.0 - s0.0));
            } else {
                warnings.push(format!(
                    "folders {f0} and {f1} of type `{pt}` start together at {s0}; not linked"
                ));
            }
        }
    }
    (nodes, edges, warnings)
}

fn assemble(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<TpmGraph, GraphError> {
    let mut nodes = nodes;
    nodes.sort_by(|a, b| (a.time(), &a.id).cmp(&(b.time(), &b.id)));
    let mut edges = edges;
    edges.sort();
    let mut g = TpmGraph::new();
    for n in nodes {
        g.add_node(n)?;
    }
    for e in edges {
        g.add_edge(e)?;
    }
    Ok(g)
}

/// Step 1: artifact instances and their `happenedBefore` chains.
pub fn expand_artifacts(opm: &OpmGraph) -> TpmGraph {
    let plan = timeline::plan(opm);
    let (n, e) = instances(opm, &plan.artifacts, OpmKind::Artifact);
    assemble(n, e).expect("instance chains satisfy the graph rules")
}

/// Step 2: agent instances and their `happenedBefore` chains.
pub fn expand_agents(opm: &OpmGraph) -> TpmGraph {
    let plan = timeline::plan(opm);
    let (n, e) = instances(opm, &plan.agents, OpmKind::Agent);
    assemble(n, e).expect("instance chains satisfy the graph rules")
}

/// Step 3: events, process folders, event chains and `startedBefore` links.
pub fn expand_processes(opm: &OpmGraph) -> TpmGraph {
    let plan = timeline::plan(opm);
    let (n, e, _) = process_parts(opm, &plan);
    assemble(n, e).expect("process folders satisfy the graph rules")
}

pub fn convert(opm: &OpmGraph) -> Result<(TpmGraph, ConversionReport), ConversionError> {
    let plan = timeline::plan(opm);
    if plan.has_errors() {
        return Err(ConversionError::Invalid(ValidationReport { issues: plan.issues }));
    }
    let mut warnings: Vec<String> = plan.issues.iter().map(|i| i.message.clone()).collect();
    let (mut nodes, mut edges) = instances(opm, &plan.artifacts, OpmKind::Artifact);
    let (an, ae) = instances(opm, &plan.agents, OpmKind::Agent);
    let (pn, pe, pw) = process_parts(opm, &plan);
    nodes.extend(an);
    nodes.extend(pn);
    edges.extend(ae);
    edges.extend(pe);
    warnings.extend(pw);
    edges.extend(
        plan.links
            .iter()
            .map(|l| EdgeRecord::new(l.from.node_id(), l.relation, l.to.node_id())),
    );
    let graph = assemble(nodes, edges)?;

    let count_nodes = |k: NodeKind| graph.nodes().filter(|(_, n)| n.kind == k).count();
    let count_edges = |f: &dyn Fn(Relation) -> bool| graph.edges().filter(|(_, e)| f(e.relation)).count();
    let report = ConversionReport {
        artifact_instances_created: count_nodes(NodeKind::ArtifactInstance),
        agent_instances_created: count_nodes(NodeKind::AgentInstance),
        events_created: count_nodes(NodeKind::Event),
        folders_created: count_nodes(NodeKind::FolderNode),
        happened_before_edges: count_edges(&|r| r == Relation::HappenedBefore),
        started_before_edges: count_edges(&|r| r == Relation::StartedBefore),
        causal_edges: count_edges(&|r| r.is_causal() || r == Relation::WasControlledBy),
        warnings,
    };
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntityId;
    use crate::opm::parse_opm;

    fn times(g: &TpmGraph, entity: &str) -> Vec<u64> {
        g.instances_of(&EntityId::from(entity)).iter().map(|n| n.time().0).collect()
    }

    #[test]
    fn artifact_used_twice_gets_two_instances() {
        let opm = parse_opm(
            "node A2 artifact\nnode P1 process\nnode P3 process\n\
             edge P1 used A2 t=2\nedge P3 used A2 t=4\n",
        )
        .unwrap();
        let g = expand_artifacts(&opm);
        assert_eq!(times(&g, "A2"), [2, 4]);
        assert_eq!(g.edge_count(), 1);
        let (_, e) = g.edges().next().unwrap();
        assert_eq!(e.weight, Some(2));
    }

    #[test]
    fn chain_links_consecutive_times_only() {
        let opm = parse_opm(
            "node A artifact\nnode P process\nnode Q process\nnode R process\n\
             edge P used A t=1\nedge Q used A t=3\nedge R used A t=7\n",
        )
        .unwrap();
        let g = expand_artifacts(&opm);
        let mut weights: Vec<(String, String, u64)> = g
            .edges()
            .map(|(_, e)| (e.from.clone(), e.to.clone(), e.weight.unwrap()))
            .collect();
        weights.sort();
        assert_eq!(
            weights,
            [("A@1".into(), "A@3".into(), 2), ("A@3".into(), "A@7".into(), 4)]
        );
    }

    #[test]
    fn idle_agent_has_no_instances() {
        let opm = parse_opm("node Idle agent\n").unwrap();
        assert!(expand_agents(&opm).is_empty());
        let (_, report) = convert(&opm).unwrap();
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn single_interaction_folder_has_zero_duration() {
        let opm = parse_opm("node A artifact\nnode P process\nedge P used A t=5\n").unwrap();
        let g = expand_processes(&opm);
        let f = g.node_by_id("process:P").unwrap();
        assert_eq!((f.start, f.duration), (Some(Timestamp(5)), Some(0)));
        assert_eq!(f.attributes.get("type").map(String::as_str), Some("process"));
    }

    #[test]
    fn empty_graph_converts_to_empty_graph() {
        let (g, report) = convert(&OpmGraph::new()).unwrap();
        assert!(g.is_empty());
        assert_eq!(report, ConversionReport::default());
    }

    #[test]
    fn invalid_graph_is_refused() {
        let opm = parse_opm("node P process\nedge P used Ghost t=1\n").unwrap();
        assert!(matches!(convert(&opm), Err(ConversionError::Invalid(_))));
    }

    #[test]
    fn rewrite_reads_previous_version() {
        let opm = parse_opm(
            "node A artifact\nnode P process\nnode Q process\n\
             edge A wasGeneratedBy Q t=1\nedge P used A t=3\nedge A wasGeneratedBy P t=3\n",
        )
        .unwrap();
        let (g, _) = convert(&opm).unwrap();
        let used = g.edges().find(|(_, e)| e.relation == Relation::Used).unwrap().1;
        assert_eq!((used.from.as_str(), used.to.as_str()), ("P@3", "A@1"));
        assert!(g.invariant_violations().is_empty());
    }
}
