//! Reference path matcher: enumerate every simple walk, then test each one
//! against the expression with a direct recursive interpreter. Exponential;
//! only meant for small graphs in tests.

use std::collections::{BTreeMap, BTreeSet};

use super::{Digraph, ReachError};
use crate::eval::Orientation;
use crate::graph::TpmGraph;
use crate::model::Relation;
use crate::query::PathRegex;

/// Allowed values per expression variable. `None` admits anything of the
/// right role. Every variable of the expression must appear in exactly one
/// of the two maps.
#[derive(Debug, Clone, Default)]
pub struct OracleClasses {
    pub nodes: BTreeMap<String, Option<BTreeSet<String>>>,
    pub edges: BTreeMap<String, Option<BTreeSet<Relation>>>,
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub orientation: Orientation,
    pub start: Option<BTreeSet<String>>,
    pub end: Option<BTreeSet<String>>,
    /// Keep only walks that are not a contiguous part of another match.
    pub maximal: bool,
    pub max_nodes: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            orientation: Orientation::Lineage,
            start: None,
            end: None,
            maximal: true,
            max_nodes: super::ORACLE_MAX_NODES,
        }
    }
}

/// Node ids and the (from, relation, to) triples of the stored edges taken,
/// in walk order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OraclePath {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, Relation, String)>,
}

enum Item<'a> {
    Node(&'a str),
    Edge(Relation),
}

pub fn oracle_match(
    graph: &TpmGraph,
    regex: &PathRegex,
    classes: &OracleClasses,
    options: &OracleOptions,
) -> Result<Vec<OraclePath>, ReachError> {
    let node_count = graph.nodes().count();
    if node_count > options.max_nodes {
        return Err(ReachError::GraphTooLarge {
            nodes: node_count,
            limit: options.max_nodes,
        });
    }
    let d = Digraph::from_tpm(graph, options.orientation);
    // Stored form of each digraph edge, for reporting.
    let stored: Vec<(String, Relation, String)> = graph
        .edges()
        .map(|(_, e)| (e.from.clone(), e.relation, e.to.clone()))
        .collect();

    let mut all = Vec::new();
    for s in 0..d.len() {
        let mut nodes = vec![s];
        let mut edges = Vec::new();
        enumerate(&d, &mut nodes, &mut edges, &mut all);
    }

    let admits = |var: &str, item: &Item| match item {
        Item::Node(id) => classes
            .nodes
            .get(var)
            .is_some_and(|c| c.as_ref().is_none_or(|s| s.contains(*id))),
        Item::Edge(r) => classes
            .edges
            .get(var)
            .is_some_and(|c| c.as_ref().is_none_or(|s| s.contains(r))),
    };

    let mut found: Vec<OraclePath> = Vec::new();
    for (nodes, edges) in all {
        let first = &d.nodes[nodes[0]];
        let last = &d.nodes[*nodes.last().expect("non-empty")];
        if options.start.as_ref().is_some_and(|s| !s.contains(first))
            || options.end.as_ref().is_some_and(|s| !s.contains(last))
        {
            continue;
        }
        let mut items = vec![Item::Node(&d.nodes[nodes[0]])];
        for (i, &e) in edges.iter().enumerate() {
            items.push(Item::Edge(d.edges[e].relation));
            items.push(Item::Node(&d.nodes[nodes[i + 1]]));
        }
        if ends(regex, &items, 0, &admits).contains(&items.len()) {
            found.push(OraclePath {
                nodes: nodes.iter().map(|&n| d.nodes[n].clone()).collect(),
                edges: edges.iter().map(|&e| stored[e].clone()).collect(),
            });
        }
    }

    if options.maximal {
        let snapshot = found.clone();
        found.retain(|p| !snapshot.iter().any(|q| q != p && contains_run(q, p)));
    }
    found.sort_by(|a, b| (a.edges.len(), &a.nodes, &a.edges).cmp(&(b.edges.len(), &b.nodes, &b.edges)));
    Ok(found)
}

fn enumerate(d: &Digraph, nodes: &mut Vec<usize>, edges: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Vec<usize>)>) {
    out.push((nodes.clone(), edges.clone()));
    let here = *nodes.last().expect("non-empty");
    for (i, e) in d.edges.iter().enumerate() {
        if e.from == here && !nodes.contains(&e.to) {
            nodes.push(e.to);
            edges.push(i);
            enumerate(d, nodes, edges, out);
            nodes.pop();
            edges.pop();
        }
    }
}

/// Whether `inner` occurs as a contiguous stretch of `outer`.
fn contains_run(outer: &OraclePath, inner: &OraclePath) -> bool {
    let k = inner.nodes.len();
    if k > outer.nodes.len() {
        return false;
    }
    (0..=outer.nodes.len() - k).any(|i| {
        outer.nodes[i..i + k] == inner.nodes[..] && outer.edges[i..i + k - 1] == inner.edges[..]
    })
}

/// Positions at which a match of `r` starting at `at` can end.
fn ends(r: &PathRegex, items: &[Item], at: usize, admits: &dyn Fn(&str, &Item) -> bool) -> BTreeSet<usize> {
    match r {
        PathRegex::Term(v) => match items.get(at) {
            Some(item) if admits(v, item) => BTreeSet::from([at + 1]),
            _ => BTreeSet::new(),
        },
        PathRegex::Seq(parts) => {
            let mut cur = BTreeSet::from([at]);
            for p in parts {
                cur = cur.iter().flat_map(|&i| ends(p, items, i, admits)).collect();
            }
            cur
        }
        PathRegex::Alt(parts) => parts.iter().flat_map(|p| ends(p, items, at, admits)).collect(),
        PathRegex::Opt(inner) => {
            let mut out = ends(inner, items, at, admits);
            out.insert(at);
            out
        }
        PathRegex::Star(inner) => repeat(inner, items, BTreeSet::from([at]), admits),
        PathRegex::Plus(inner) => repeat(inner, items, ends(inner, items, at, admits), admits),
    }
}

/// Close `from` under further repetitions of `r`.
fn repeat(
    r: &PathRegex,
    items: &[Item],
    from: BTreeSet<usize>,
    admits: &dyn Fn(&str, &Item) -> bool,
) -> BTreeSet<usize> {
    let mut seen = from.clone();
    let mut frontier: Vec<usize> = from.into_iter().collect();
    while let Some(i) = frontier.pop() {
        for j in ends(r, items, i, admits) {
            if seen.insert(j) {
                frontier.push(j);
            }
        }
    }
    seen
}
