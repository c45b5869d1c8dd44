//! Seeded generators for property tests and acceptance checks: small
//! random graphs, path queries with independently computable variable
//! classes, append-only change sequences and random query texts.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;

use crate::eval::Orientation;
use crate::graph::TpmGraph;
use crate::model::{EdgeRecord, NodeKind, NodeRecord, Relation, Timestamp};
use crate::reachability::{OracleClasses, OracleOptions};

const ARTIFACTS: [&str; 3] = ["doc0", "doc1", "doc2"];
const EVENTS: [&str; 3] = ["ev0", "ev1", "ev2"];
const AGENTS: [&str; 2] = ["ag0", "ag1"];

const POINT_RELATIONS: [Relation; 6] = [
    Relation::Used,
    Relation::WasGeneratedBy,
    Relation::WasTriggeredBy,
    Relation::WasDerivedFrom,
    Relation::WasControlledBy,
    Relation::HappenedBefore,
];

fn random_point(rng: &mut impl Rng, at: u64) -> NodeRecord {
    match rng.gen_range(0..3) {
        0 => NodeRecord::artifact(*ARTIFACTS.choose(rng).unwrap(), Timestamp(at)),
        1 => NodeRecord::event(*EVENTS.choose(rng).unwrap(), Timestamp(at)),
        _ => NodeRecord::agent(*AGENTS.choose(rng).unwrap(), Timestamp(at)),
    }
}

/// Link consecutive instances of every entity with happenedBefore.
fn chain_instances(g: &mut TpmGraph) {
    let mut by_entity: BTreeMap<String, Vec<(Timestamp, String)>> = BTreeMap::new();
    for (_, n) in g.nodes() {
        if !n.kind.is_container() {
            by_entity
                .entry(n.entity.as_str().to_owned())
                .or_default()
                .push((n.time(), n.id.clone()));
        }
    }
    for mut chain in by_entity.into_values() {
        chain.sort();
        for w in chain.windows(2) {
            let _ = g.add_edge(EdgeRecord::new(&w[0].1, Relation::HappenedBefore, &w[1].1));
        }
    }
}

/// A graph of 1..=`max_nodes` point nodes at instants 1..=6 with random
/// legal edges. Illegal draws are skipped, so the edge count varies.
pub fn random_point_graph(rng: &mut impl Rng, max_nodes: usize) -> TpmGraph {
    let target = rng.gen_range(1..=max_nodes);
    let mut g = TpmGraph::new();
    let mut attempts = 0;
    while g.nodes().count() < target && attempts < 200 {
        attempts += 1;
        let at = rng.gen_range(1..=6);
        let _ = g.add_node(random_point(rng, at));
    }
    if rng.gen_bool(0.7) {
        chain_instances(&mut g);
    }
    let ids: Vec<String> = g.nodes().map(|(_, n)| n.id.clone()).collect();
    for _ in 0..ids.len() * 3 {
        let a = ids.choose(rng).unwrap();
        let b = ids.choose(rng).unwrap();
        let rel = *POINT_RELATIONS.choose(rng).unwrap();
        let _ = g.add_edge(EdgeRecord::new(a, rel, b));
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeConstraint {
    Any,
    Kind(NodeKind),
    Entity(String),
    NotAfter(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeConstraint {
    Any,
    Label(Relation),
    Either(Relation, Relation),
}

/// A `pconstruct` over node variables `?n0..` and edge variables `?e0..`,
/// each constrained in one of a few ways.
#[derive(Debug, Clone)]
pub struct PathCase {
    pub regex: String,
    pub nodes: BTreeMap<usize, NodeConstraint>,
    pub edges: BTreeMap<usize, EdgeConstraint>,
    pub start: Option<String>,
    pub end: Option<String>,
}

struct RegexGen<'r, R: Rng> {
    rng: &'r mut R,
    nodes: BTreeSet<usize>,
    edges: BTreeSet<usize>,
}

impl<R: Rng> RegexGen<'_, R> {
    fn node(&mut self) -> String {
        let i = self.rng.gen_range(0..3);
        self.nodes.insert(i);
        if self.rng.gen_bool(0.2) {
            let j = (i + self.rng.gen_range(1..3)) % 3;
            self.nodes.insert(j);
            format!("(?n{i} | ?n{j})")
        } else {
            format!("?n{i}")
        }
    }

    /// A non-empty run of edge-node steps.
    fn block(&mut self, depth: u32) -> String {
        let roll = if depth == 0 { 1.0 } else { self.rng.gen::<f64>() };
        if roll < 0.25 {
            format!("{} {}", self.block(depth - 1), self.block(depth - 1))
        } else if roll < 0.45 {
            format!("({} | {})", self.block(depth - 1), self.block(depth - 1))
        } else {
            let e = self.rng.gen_range(0..3);
            self.edges.insert(e);
            format!("?e{e} {}", self.node())
        }
    }

    fn tail(&mut self) -> String {
        let b = self.block(2);
        match self.rng.gen_range(0..4) {
            0 => b,
            1 => format!("({b})*"),
            2 => format!("({b})+"),
            _ => format!("({b})?"),
        }
    }
}

pub fn random_path_case(rng: &mut impl Rng) -> PathCase {
    let mut g = RegexGen {
        rng,
        nodes: BTreeSet::new(),
        edges: BTreeSet::new(),
    };
    let mut regex = g.node();
    for _ in 0..g.rng.gen_range(1..=2) {
        regex.push(' ');
        regex.push_str(&g.tail());
    }
    let RegexGen { rng, nodes, edges } = g;
    let nodes = nodes
        .into_iter()
        .map(|i| {
            let c = match rng.gen_range(0..5) {
                0 | 1 => NodeConstraint::Any,
                2 => NodeConstraint::Kind(
                    *[NodeKind::ArtifactInstance, NodeKind::Event, NodeKind::AgentInstance]
                        .choose(rng)
                        .unwrap(),
                ),
                3 => NodeConstraint::Entity(
                    ARTIFACTS.iter().chain(&EVENTS).choose(rng).unwrap().to_string(),
                ),
                _ => NodeConstraint::NotAfter(rng.gen_range(1..=6)),
            };
            (i, c)
        })
        .collect();
    let edges = edges
        .into_iter()
        .map(|i| {
            let c = match rng.gen_range(0..4) {
                0 => EdgeConstraint::Any,
                1 | 2 => EdgeConstraint::Label(*POINT_RELATIONS.choose(rng).unwrap()),
                _ => {
                    let two: Vec<&Relation> = POINT_RELATIONS.choose_multiple(rng, 2).collect();
                    EdgeConstraint::Either(*two[0], *two[1])
                }
            };
            (i, c)
        })
        .collect();
    let start = endpoint(rng, 0.25);
    let end = endpoint(rng, 0.15);
    PathCase {
        regex,
        nodes,
        edges,
        start,
        end,
    }
}

fn endpoint(rng: &mut impl Rng, p: f64) -> Option<String> {
    if rng.gen_bool(p) {
        Some(ARTIFACTS.iter().chain(&EVENTS).choose(rng).unwrap().to_string())
    } else {
        None
    }
}

impl PathCase {
    pub fn query_text(&self, name: &str) -> String {
        let mut body = String::new();
        for (i, c) in &self.nodes {
            body.push_str(&match c {
                NodeConstraint::Any => format!(" ?n{i} @isA entityNode."),
                NodeConstraint::Kind(k) => format!(" ?n{i} @type {}.", k.token()),
                NodeConstraint::Entity(e) => format!(" ?n{i} @id {e}."),
                NodeConstraint::NotAfter(t) => {
                    format!(" ?n{i} @timestamp ?ts{i}. filter(Timesemantic(?ts{i}, [?,?,?,t{t}])).")
                }
            });
        }
        for (i, c) in &self.edges {
            body.push_str(&match c {
                EdgeConstraint::Any => format!(" ?e{i} @isA edge."),
                EdgeConstraint::Label(r) => format!(" ?e{i} @label {r}."),
                EdgeConstraint::Either(a, b) => {
                    format!(" ?e{i} @label ?l{i}. filter(?l{i} = {a} || ?l{i} = {b}).")
                }
            });
        }
        format!(
            "pconstruct {name} ({}, {}, {}) as ?p where {{ ?p @isA pathNode.{body} }}",
            self.start.as_deref().unwrap_or(""),
            self.end.as_deref().unwrap_or(""),
            self.regex
        )
    }

    /// Variable classes and options for the oracle, computed straight from
    /// the node records without going through the query evaluator.
    pub fn oracle_inputs(&self, graph: &TpmGraph) -> (OracleClasses, OracleOptions) {
        let mut classes = OracleClasses::default();
        for (i, c) in &self.nodes {
            let set = match c {
                NodeConstraint::Any => None,
                _ => Some(
                    graph
                        .nodes()
                        .filter(|(_, n)| match c {
                            NodeConstraint::Kind(k) => n.kind == *k,
                            NodeConstraint::Entity(e) => n.entity.as_str() == e,
                            NodeConstraint::NotAfter(t) => n.time().0 <= *t,
                            NodeConstraint::Any => true,
                        })
                        .map(|(_, n)| n.id.clone())
                        .collect(),
                ),
            };
            classes.nodes.insert(format!("n{i}"), set);
        }
        for (i, c) in &self.edges {
            let set = match c {
                EdgeConstraint::Any => None,
                EdgeConstraint::Label(r) => Some(BTreeSet::from([*r])),
                EdgeConstraint::Either(a, b) => Some(BTreeSet::from([*a, *b])),
            };
            classes.edges.insert(format!("e{i}"), set);
        }
        let instances = |entity: &Option<String>| {
            entity.as_ref().map(|e| {
                graph
                    .nodes()
                    .filter(|(_, n)| n.entity.as_str() == e)
                    .map(|(_, n)| n.id.clone())
                    .collect()
            })
        };
        let options = OracleOptions {
            orientation: Orientation::Lineage,
            start: instances(&self.start),
            end: instances(&self.end),
            maximal: self.start.is_none() && self.end.is_none(),
            ..OracleOptions::default()
        };
        (classes, options)
    }
}

/// One step of an append-only history: the nodes and edges added at one
/// instant.
#[derive(Debug, Clone, Default)]
pub struct AppendStep {
    pub at: u64,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

/// `steps` instants of growth. Each step adds one to three point nodes at
/// that instant, chains them to earlier instances and draws a few causal
/// edges back into the existing graph. Every step applies cleanly to the
/// graph built by the steps before it.
pub fn random_append_sequence(rng: &mut impl Rng, steps: u64) -> Vec<AppendStep> {
    let mut g = TpmGraph::new();
    let mut out = Vec::new();
    for at in 1..=steps {
        let mut step = AppendStep {
            at,
            ..AppendStep::default()
        };
        for _ in 0..rng.gen_range(1..=3) {
            let n = random_point(rng, at);
            let prev = g
                .instances_of(&n.entity)
                .last()
                .map(|p| p.id.clone());
            let Ok(id) = g.add_node(n.clone()) else { continue };
            step.nodes.push(n);
            if let Some(prev) = prev {
                let e = EdgeRecord::new(prev, Relation::HappenedBefore, id);
                if g.add_edge(e.clone()).is_ok() {
                    step.edges.push(e);
                }
            }
        }
        let fresh: Vec<String> = step.nodes.iter().map(|n| n.default_id()).collect();
        let ids: Vec<String> = g.nodes().map(|(_, n)| n.id.clone()).collect();
        for _ in 0..4 {
            let a = fresh.choose(rng).unwrap();
            let b = ids.choose(rng).unwrap();
            let rel = *POINT_RELATIONS[..5].choose(rng).unwrap();
            let e = EdgeRecord::new(a, rel, b);
            if g.find_edge(g.index_of(a).unwrap(), rel, g.index_of(b).unwrap()).is_none()
                && g.add_edge(e.clone()).is_ok()
            {
                step.edges.push(e);
            }
        }
        out.push(step);
    }
    out
}

/// Folder definitions used by the agent convergence checks.
pub const TIMED_FOLDER_QUERIES: [&str; 5] = [
    "fconstruct f as ?f select ?x where { ?f @timed true. ?x @type event. }",
    "fconstruct f as ?f select ?x where { ?f @timed true. ?x @type artifact. ?x @id doc1. }",
    "fconstruct f as ?f select ?x where { ?f @timed true. ?x @type event. ?x used ?a. ?a @id doc0. }",
    "fconstruct f as ?f select ?a where { ?f @timed true. ?x wasControlledBy ?a. ?x @type event. }",
    "fconstruct f as ?f select ?x where { ?f @timed true. ?x @isA entityNode. ?x @timestamp ?ts. filter(Timesemantic(?ts, after t3)). }",
];

/// Random query text in the surface syntax, covering every statement form.
pub fn random_query_text(rng: &mut impl Rng) -> String {
    let mut q = QueryGen { rng };
    match q.rng.gen_range(0..4) {
        0 => q.select(false),
        1 => {
            let members = match q.rng.gen_range(0..3) {
                0 => String::new(),
                1 => " select ?x".to_owned(),
                _ => " select (fa, fb)".to_owned(),
            };
            format!("fconstruct {} as ?c{members} where {}", q.name(), q.group(&["x"], false))
        }
        2 => {
            let regex = q.regex(2);
            let start = if q.rng.gen_bool(0.3) { q.value() } else { String::new() };
            let end = if q.rng.gen_bool(0.3) { q.value() } else { String::new() };
            format!(
                "pconstruct {} ({start}, {end}, {regex}) as ?c where {}",
                q.name(),
                q.group(&[], false)
            )
        }
        _ => {
            let scope = if q.rng.gen_bool(0.8) {
                q.name()
            } else {
                format!("{}, {}", q.name(), q.name())
            };
            format!("({scope}) apply ({})", q.select(true))
        }
    }
}

struct QueryGen<'r, R: Rng> {
    rng: &'r mut R,
}

impl<R: Rng> QueryGen<'_, R> {
    fn name(&mut self) -> String {
        ["analysis_process", "fa", "fb", "docTS", "p-1", "ns:thing"]
            .choose(self.rng)
            .unwrap()
            .to_string()
    }

    fn var(&mut self) -> String {
        format!("?{}", ["x", "y", "z", "ts", "e"].choose(self.rng).unwrap())
    }

    fn value(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => "`Analysis.doc'".to_owned(),
            1 => "\"two words\"".to_owned(),
            2 => self.rng.gen_range(0..50).to_string(),
            3 => format!("t{}", self.rng.gen_range(0..20)),
            4 => "'t3'".to_owned(),
            _ => ["artifact", "event", "Alex", "used"].choose(self.rng).unwrap().to_string(),
        }
    }

    fn time(&mut self, scoped: bool) -> String {
        let atom = |rng: &mut R| match rng.gen_range(0..if scoped { 4 } else { 2 }) {
            0 => format!("t{}", rng.gen_range(0..20)),
            1 => rng.gen_range(0..9).to_string(),
            2 => "t".to_owned(),
            _ => "d".to_owned(),
        };
        let mut s = atom(self.rng);
        for _ in 0..self.rng.gen_range(0..3) {
            s.push_str(if self.rng.gen_bool(0.5) { "+" } else { "-" });
            s.push_str(&atom(self.rng));
        }
        s
    }

    fn time_spec(&mut self, scoped: bool) -> String {
        if self.rng.gen_bool(0.5) {
            let slots: Vec<String> = (0..4)
                .map(|_| if self.rng.gen_bool(0.5) { "?".to_owned() } else { self.time(scoped) })
                .collect();
            format!("[{}]", slots.join(","))
        } else {
            let kw = *crate::query::TimeKeyword::ALL.choose(self.rng).unwrap();
            let args: Vec<String> = (0..kw.arity()).map(|_| self.time(scoped)).collect();
            format!("{} {}", kw.name(), args.join(", "))
        }
    }

    fn filter(&mut self, vars: &[String], depth: u32, scoped: bool) -> String {
        let v = vars.choose(self.rng).unwrap().clone();
        let roll = if depth == 0 { self.rng.gen_range(3..5) } else { self.rng.gen_range(0..5) };
        match roll {
            0 => format!("{} || {}", self.filter(vars, depth - 1, scoped), self.filter(vars, depth - 1, scoped)),
            1 => format!(
                "({}) && {}",
                self.filter(vars, depth - 1, scoped),
                self.filter(vars, depth - 1, scoped)
            ),
            2 => format!("!({})", self.filter(vars, depth - 1, scoped)),
            3 => format!("Timesemantic({v}, {})", self.time_spec(scoped)),
            _ => {
                let op = *["=", "!=", "<", "<=", ">", ">="].choose(self.rng).unwrap();
                let rhs = if self.rng.gen_bool(0.3) { self.time(scoped) } else { self.value() };
                format!("{v} {op} {rhs}")
            }
        }
    }

    /// Patterns binding at least `must` plus some random variables.
    fn group(&mut self, must: &[&str], scoped: bool) -> String {
        let mut bound: Vec<String> = must.iter().map(|v| format!("?{v}")).collect();
        let mut parts = Vec::new();
        for v in must {
            parts.push(format!("?{v} @isA entityNode."));
        }
        for _ in 0..self.rng.gen_range(1..4) {
            let s = self.var();
            let pattern = match self.rng.gen_range(0..3) {
                0 => format!("{s} @{} {}", ["type", "id", "description"].choose(self.rng).unwrap(), self.value()),
                1 => {
                    let o = self.var();
                    bound.push(o.clone());
                    format!("{s} {} {o}", POINT_RELATIONS.choose(self.rng).unwrap())
                }
                _ => {
                    let o = self.var();
                    bound.push(o.clone());
                    format!("{s} @timestamp {o}")
                }
            };
            bound.push(s);
            parts.push(format!("{pattern}."));
        }
        for _ in 0..self.rng.gen_range(0..3) {
            let f = self.filter(&bound, 2, scoped);
            parts.push(format!("filter({f})."));
        }
        format!("{{ {} }}", parts.join(" "))
    }

    fn select(&mut self, scoped: bool) -> String {
        let distinct = if self.rng.gen_bool(0.3) { "distinct " } else { "" };
        if self.rng.gen_bool(0.4) {
            format!("select {distinct}* where {}", self.group(&[], scoped))
        } else {
            format!("select {distinct}?x where {}", self.group(&["x"], scoped))
        }
    }

    fn regex(&mut self, depth: u32) -> String {
        let node = |rng: &mut R| format!("?n{}", rng.gen_range(0..3));
        let mut s = node(self.rng);
        for _ in 0..self.rng.gen_range(1..3) {
            let step = if depth > 0 && self.rng.gen_bool(0.3) {
                format!("{} | ?e {}", self.inner(depth - 1), node(self.rng))
            } else {
                format!("?e {}", node(self.rng))
            };
            let op = *["", "*", "+", "?"].choose(self.rng).unwrap();
            s.push_str(&format!(" ({step}){op}"));
        }
        s
    }

    fn inner(&mut self, depth: u32) -> String {
        let base = format!("?e ?n{}", self.rng.gen_range(0..3));
        if depth > 0 && self.rng.gen_bool(0.5) {
            format!("{base} ({})*", self.inner(depth - 1))
        } else {
            base
        }
    }
}
