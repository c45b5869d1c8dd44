//! Reachability over plain directed graphs: path traversal, transitive
//! closure and cycle elimination, plus a brute-force path oracle.

mod oracle;

use std::collections::HashMap;

use thiserror::Error;

use crate::eval::Orientation;
use crate::graph::TpmGraph;
use crate::model::Relation;
use crate::opm::OpmGraph;

pub use oracle::{oracle_match, OracleClasses, OracleOptions, OraclePath};

pub const DEFAULT_CLOSURE_BOUND: usize = 10_000;
pub const ORACLE_MAX_NODES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("graph has {nodes} nodes, limit is {limit}")]
    GraphTooLarge { nodes: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiEdge {
    pub from: usize,
    pub to: usize,
    pub relation: Relation,
}

/// Nodes and labelled edges in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Digraph {
    pub nodes: Vec<String>,
    pub edges: Vec<DiEdge>,
    index: HashMap<String, usize>,
}

impl Digraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.index.insert(id.to_owned(), self.nodes.len());
        self.nodes.push(id.to_owned());
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, from: &str, relation: Relation, to: &str) {
        let from = self.add_node(from);
        let to = self.add_node(to);
        self.edges.push(DiEdge { from, to, relation });
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A TPM graph's nodes and edges. Under [`Orientation::Lineage`]
    /// temporal edges point from the later instance to the earlier one.
    pub fn from_tpm(graph: &TpmGraph, orientation: Orientation) -> Self {
        let mut d = Digraph::new();
        for (_, n) in graph.nodes() {
            d.add_node(&n.id);
        }
        for (_, e) in graph.edges() {
            match orientation {
                Orientation::Lineage if e.relation.is_temporal() => d.add_edge(&e.to, e.relation, &e.from),
                _ => d.add_edge(&e.from, e.relation, &e.to),
            }
        }
        d
    }

    /// Entity-level view of an OPM graph: one node per entity, one edge
    /// per stored dependency, duplicates included.
    pub fn from_opm(opm: &OpmGraph) -> Self {
        let mut d = Digraph::new();
        for n in &opm.nodes {
            d.add_node(&n.id);
        }
        for e in &opm.edges {
            d.add_edge(&e.from, e.relation, &e.to);
        }
        d
    }

    fn adjacency(&self, edge: &dyn Fn(&DiEdge) -> bool) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if edge(e) {
                adj[e.from].push((i, e.to));
            }
        }
        adj
    }

    /// True when the graph has no directed cycle (Kahn's algorithm).
    pub fn is_acyclic(&self) -> bool {
        let mut indegree = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            indegree[e.to] += 1;
        }
        let adj = self.adjacency(&|_| true);
        let mut ready: Vec<usize> = (0..self.nodes.len()).filter(|&n| indegree[n] == 0).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for &(_, m) in &adj[n] {
                indegree[m] -= 1;
                if indegree[m] == 0 {
                    ready.push(m);
                }
            }
        }
        seen == self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversedPath {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathResult {
    pub paths: Vec<TraversedPath>,
}

impl PathResult {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn node_ids<'g>(&self, graph: &'g Digraph) -> Vec<Vec<&'g str>> {
        self.paths
            .iter()
            .map(|p| p.nodes.iter().map(|&n| graph.nodes[n].as_str()).collect())
            .collect()
    }
}

/// Every simple path of at least one edge from a start node to an end node
/// over admitted edges, at most `max_len` edges long when given. Ordered by
/// length, then node ids.
pub fn traverse_paths(
    graph: &Digraph,
    start: impl Fn(&str) -> bool,
    end: impl Fn(&str) -> bool,
    edge: impl Fn(&DiEdge) -> bool,
    max_len: Option<usize>,
) -> PathResult {
    let adj = graph.adjacency(&edge);
    let mut paths = Vec::new();
    let mut on_path = vec![false; graph.len()];
    for s in 0..graph.len() {
        if !start(&graph.nodes[s]) {
            continue;
        }
        let mut walk = TraversedPath {
            nodes: vec![s],
            edges: vec![],
        };
        on_path[s] = true;
        dfs(graph, &adj, &end, max_len, &mut walk, &mut on_path, &mut paths);
        on_path[s] = false;
    }
    paths.sort_by(|a: &TraversedPath, b: &TraversedPath| {
        let ids = |p: &TraversedPath| p.nodes.iter().map(|&n| graph.nodes[n].clone()).collect::<Vec<_>>();
        (a.edges.len(), ids(a), &a.edges).cmp(&(b.edges.len(), ids(b), &b.edges))
    });
    PathResult { paths }
}

fn dfs(
    graph: &Digraph,
    adj: &[Vec<(usize, usize)>],
    end: &dyn Fn(&str) -> bool,
    max_len: Option<usize>,
    walk: &mut TraversedPath,
    on_path: &mut [bool],
    out: &mut Vec<TraversedPath>,
) {
    let here = *walk.nodes.last().expect("non-empty walk");
    if !walk.edges.is_empty() && end(&graph.nodes[here]) {
        out.push(walk.clone());
    }
    if max_len.is_some_and(|m| walk.edges.len() >= m) {
        return;
    }
    for &(e, n) in &adj[here] {
        if on_path[n] {
            continue;
        }
        on_path[n] = true;
        walk.nodes.push(n);
        walk.edges.push(e);
        dfs(graph, adj, end, max_len, walk, on_path, out);
        walk.nodes.pop();
        walk.edges.pop();
        on_path[n] = false;
    }
}

/// Reflexive transitive closure as one bit row per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureMatrix {
    pub nodes: Vec<String>,
    index: HashMap<String, usize>,
    words: usize,
    bits: Vec<u64>,
}

impl ClosureMatrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reaches_ix(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn reaches(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&a), Some(&b)) => self.reaches_ix(a, b),
            _ => false,
        }
    }

    /// Reachable pairs, reflexive ones excluded.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for a in 0..self.len() {
            for b in 0..self.len() {
                if a != b && self.reaches_ix(a, b) {
                    out.push((self.nodes[a].as_str(), self.nodes[b].as_str()));
                }
            }
        }
        out
    }
}

/// Closure over admitted edges with the default node bound. Uses one BFS
/// per node and O(n²) bits.
pub fn transitive_closure(graph: &Digraph, edge: impl Fn(&DiEdge) -> bool) -> Result<ClosureMatrix, ReachError> {
    transitive_closure_bounded(graph, edge, DEFAULT_CLOSURE_BOUND)
}

pub fn transitive_closure_bounded(
    graph: &Digraph,
    edge: impl Fn(&DiEdge) -> bool,
    limit: usize,
) -> Result<ClosureMatrix, ReachError> {
    let n = graph.len();
    if n > limit {
        return Err(ReachError::GraphTooLarge { nodes: n, limit });
    }
    let adj = graph.adjacency(&edge);
    let words = n.div_ceil(64);
    let mut bits = vec![0u64; n * words];
    let mut queue = Vec::new();
    for s in 0..n {
        let row = &mut bits[s * words..(s + 1) * words];
        row[s / 64] |= 1 << (s % 64);
        queue.clear();
        queue.push(s);
        while let Some(x) = queue.pop() {
            for &(_, y) in &adj[x] {
                if row[y / 64] >> (y % 64) & 1 == 0 {
                    row[y / 64] |= 1 << (y % 64);
                    queue.push(y);
                }
            }
        }
    }
    Ok(ClosureMatrix {
        nodes: graph.nodes.clone(),
        index: graph.index.clone(),
        words,
        bits,
    })
}

/// Remove back edges found by a depth-first search that starts from each
/// node in insertion order and follows edges in insertion order. Returns the
/// acyclic graph and the removed edges.
pub fn eliminate_cycles(graph: &Digraph) -> (Digraph, Vec<DiEdge>) {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let adj = graph.adjacency(&|_| true);
    let mut mark = vec![Mark::New; graph.len()];
    let mut back = vec![false; graph.edges.len()];
    for root in 0..graph.len() {
        if mark[root] != Mark::New {
            continue;
        }
        // Iterative DFS: (node, next adjacency position).
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Open;
        while let Some(&mut (x, ref mut pos)) = stack.last_mut() {
            if let Some(&(e, y)) = adj[x].get(*pos) {
                *pos += 1;
                match mark[y] {
                    Mark::New => {
                        mark[y] = Mark::Open;
                        stack.push((y, 0));
                    }
                    Mark::Open => back[e] = true,
                    Mark::Done => {}
                }
            } else {
                mark[x] = Mark::Done;
                stack.pop();
            }
        }
    }
    let mut out = graph.clone();
    let mut removed = Vec::new();
    out.edges.clear();
    for (i, e) in graph.edges.iter().enumerate() {
        if back[i] {
            removed.push(e.clone());
        } else {
            out.edges.push(e.clone());
        }
    }
    (out, removed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Digraph {
        let mut g = Digraph::new();
        g.add_edge("a", Relation::Used, "b");
        g.add_edge("b", Relation::Used, "c");
        g
    }

    #[test]
    fn closure_of_chain() {
        let c = transitive_closure(&chain(), |_| true).unwrap();
        assert_eq!(c.pairs(), vec![("a", "b"), ("a", "c"), ("b", "c")]);
        assert!(c.reaches("a", "a"));
        assert!(!c.reaches("c", "a"));
        let empty = transitive_closure(&Digraph::new(), |_| true).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn closure_bound() {
        let err = transitive_closure_bounded(&chain(), |_| true, 2).unwrap_err();
        assert_eq!(err, ReachError::GraphTooLarge { nodes: 3, limit: 2 });
    }

    #[test]
    fn traversal_limits() {
        let g = chain();
        let all = traverse_paths(&g, |_| true, |_| true, |_| true, None);
        assert_eq!(all.len(), 3);
        let direct = traverse_paths(&g, |_| true, |_| true, |_| true, Some(1));
        assert_eq!(direct.len(), 2);
        assert!(traverse_paths(&g, |_| false, |_| true, |_| true, None).is_empty());
    }

    #[test]
    fn two_cycle_drops_closing_edge() {
        let mut g = Digraph::new();
        g.add_edge("a", Relation::Used, "b");
        g.add_edge("b", Relation::Used, "a");
        let (out, removed) = eliminate_cycles(&g);
        assert_eq!(removed, vec![DiEdge { from: 1, to: 0, relation: Relation::Used }]);
        assert!(out.is_acyclic());
        assert!(!g.is_acyclic());
    }

    #[test]
    fn acyclic_input_untouched() {
        let g = chain();
        let (out, removed) = eliminate_cycles(&g);
        assert_eq!(out, g);
        assert!(removed.is_empty());
    }
}
