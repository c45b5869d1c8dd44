//! Graphviz rendering. Shapes follow the usual provenance drawing:
//! triangle for events, circle for artifacts, octagon for agents, box for
//! folders and a dashed box for paths.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use tpm::engine::MaterializedNode;
use tpm::model::{NodeKind, NodeRecord, Relation};
use tpm::TpmGraph;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn label(n: &NodeRecord) -> String {
    if n.kind.is_container() {
        n.id.clone()
    } else {
        format!("{}@t{}", n.entity.as_str(), n.time().0)
    }
}

fn style(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Event => "shape=triangle",
        NodeKind::ArtifactInstance => "shape=circle",
        NodeKind::AgentInstance => "shape=octagon",
        NodeKind::FolderNode => "shape=box",
        NodeKind::PathNode => "shape=box, style=dashed",
    }
}

pub fn graph_to_dot(graph: &TpmGraph, name: &str) -> String {
    let mut out = format!("digraph {} {{\n  rankdir=RL;\n", quote(name));
    for (_, n) in graph.nodes() {
        let _ = writeln!(out, "  {} [label={}, {}];", quote(&n.id), quote(&label(n)), style(n.kind));
    }
    for (_, e) in graph.edges() {
        let attrs = match (e.relation, e.weight) {
            (_, Some(w)) => format!("label={}", quote(&format!("{} {w}", e.relation))),
            (Relation::IsPartOf, _) => "label=\"isPartOf\", style=dotted".to_owned(),
            (r, None) => format!("label={}", quote(r.name())),
        };
        let _ = writeln!(out, "  {} -> {} [{attrs}];", quote(&e.from), quote(&e.to));
    }
    out.push_str("}\n");
    out
}

/// The container node with its members (folders) or its paths (path nodes).
pub fn materialized_to_dot(graph: &TpmGraph, m: &MaterializedNode) -> String {
    let Some(me) = graph.index_of(&m.name) else {
        return graph_to_dot(&TpmGraph::new(), &m.name);
    };
    let sub = match m.kind {
        NodeKind::PathNode => {
            let mut nodes: BTreeSet<_> = BTreeSet::from([me]);
            let mut edges = BTreeSet::new();
            for p in &m.paths {
                nodes.extend(p.nodes.iter().filter_map(|id| graph.index_of(id)));
                for e in &p.edges {
                    if let (Some(f), Some(t)) = (graph.index_of(&e.from), graph.index_of(&e.to)) {
                        edges.extend(graph.find_edge(f, e.relation, t));
                    }
                }
            }
            graph.restricted(nodes, edges)
        }
        _ => {
            let nodes = m
                .members
                .iter()
                .filter_map(|id| graph.index_of(id))
                .chain(std::iter::once(me));
            graph.induced(nodes)
        }
    };
    graph_to_dot(&sub, &m.name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tpm::Timestamp;

    #[test]
    fn shapes_and_weights() {
        let mut g = TpmGraph::new();
        let a = g.add_node(NodeRecord::artifact("doc", Timestamp(3))).unwrap();
        let b = g.add_node(NodeRecord::artifact("doc", Timestamp(5))).unwrap();
        g.add_edge(tpm::EdgeRecord::new(a, Relation::HappenedBefore, b)).unwrap();
        let dot = graph_to_dot(&g, "g");
        assert!(dot.contains("\"doc@3\" [label=\"doc@t3\", shape=circle];"));
        assert!(dot.contains("\"doc@3\" -> \"doc@5\" [label=\"happenedBefore 2\"];"));
    }
}
