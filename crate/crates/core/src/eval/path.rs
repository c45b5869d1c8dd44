//! Regular path matching for `pconstruct`.
//!
//! A path expression alternates node terms and edge terms. It is compiled
//! to a Thompson NFA over variable symbols; walks are enumerated by DFS
//! carrying the set of live NFA states, so a walk is extended only while
//! some prefix of the expression still matches it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::bgp::solve;
use super::{EvalError, Scope};
use crate::graph::{EdgeIx, NodeIx, TpmGraph};
use crate::model::EntityId;
use crate::query::{GroupPattern, PathRegex, Pconstruct, Term, Value};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Orientation {
    /// Causal and membership edges in stored direction, time edges reversed,
    /// so that every step moves towards the past.
    #[default]
    Lineage,
    Stored,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathOptions {
    /// Maximum number of edges in a walk.
    pub max_path_len: Option<usize>,
    pub orientation: Orientation,
    /// Keep only walks that are not part of a longer match. `None` turns
    /// this on exactly when neither endpoint is given.
    pub maximal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Walk {
    pub nodes: Vec<NodeIx>,
    pub edges: Vec<EdgeIx>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn node_ids<'g>(&self, graph: &'g TpmGraph) -> Vec<&'g str> {
        self.nodes.iter().map(|n| graph.node(*n).id.as_str()).collect()
    }
}

/// The set of graph elements a term may match; `None` means anything.
pub type Class<T> = Option<BTreeSet<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Node,
    Edge,
}

/// Thompson NFA; symbols are variable indices.
#[derive(Debug, Clone)]
pub struct Nfa {
    trans: Vec<Vec<(Option<usize>, usize)>>,
    start: usize,
    accept: usize,
    pub vars: Vec<String>,
}

impl Nfa {
    pub fn compile(regex: &PathRegex) -> Nfa {
        let mut vars: Vec<String> = regex.vars().into_iter().map(str::to_owned).collect();
        vars.sort();
        let mut nfa = Nfa {
            trans: Vec::new(),
            start: 0,
            accept: 0,
            vars,
        };
        let (s, a) = nfa.build(regex);
        nfa.start = s;
        nfa.accept = a;
        nfa
    }

    fn state(&mut self) -> usize {
        self.trans.push(Vec::new());
        self.trans.len() - 1
    }

    fn build(&mut self, r: &PathRegex) -> (usize, usize) {
        match r {
            PathRegex::Term(v) => {
                let sym = self.vars.iter().position(|x| x == v).expect("collected");
                let (s, a) = (self.state(), self.state());
                self.trans[s].push((Some(sym), a));
                (s, a)
            }
            PathRegex::Seq(xs) => {
                let parts: Vec<(usize, usize)> = xs.iter().map(|x| self.build(x)).collect();
                for w in parts.windows(2) {
                    self.trans[w[0].1].push((None, w[1].0));
                }
                (parts[0].0, parts[parts.len() - 1].1)
            }
            PathRegex::Alt(xs) => {
                let (s, a) = (self.state(), self.state());
                for x in xs {
                    let (xs_, xa) = self.build(x);
                    self.trans[s].push((None, xs_));
                    self.trans[xa].push((None, a));
                }
                (s, a)
            }
            PathRegex::Star(x) | PathRegex::Plus(x) | PathRegex::Opt(x) => {
                let (s, a) = (self.state(), self.state());
                let (xs_, xa) = self.build(x);
                self.trans[s].push((None, xs_));
                self.trans[xa].push((None, a));
                if !matches!(r, PathRegex::Plus(_)) {
                    self.trans[s].push((None, a));
                }
                if !matches!(r, PathRegex::Opt(_)) {
                    self.trans[xa].push((None, xs_));
                }
                (s, a)
            }
        }
    }

    fn closure(&self, states: &mut Vec<usize>) {
        let mut seen: HashSet<usize> = states.iter().copied().collect();
        let mut stack = states.clone();
        while let Some(s) = stack.pop() {
            for &(sym, t) in &self.trans[s] {
                if sym.is_none() && seen.insert(t) {
                    states.push(t);
                    stack.push(t);
                }
            }
        }
        states.sort_unstable();
        states.dedup();
    }

    pub fn initial(&self) -> Vec<usize> {
        let mut s = vec![self.start];
        self.closure(&mut s);
        s
    }

    pub fn step(&self, states: &[usize], admits: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut next = Vec::new();
        for &s in states {
            for &(sym, t) in &self.trans[s] {
                if sym.is_some_and(&admits) {
                    next.push(t);
                }
            }
        }
        self.closure(&mut next);
        next
    }

    pub fn accepts(&self, states: &[usize]) -> bool {
        states.binary_search(&self.accept).is_ok()
    }

    /// Role of each variable (node or edge position). Fails if a variable
    /// is used in both positions or a match could end on an edge.
    pub fn roles(&self) -> Result<Vec<Role>, EvalError> {
        let mut roles: Vec<Option<Role>> = vec![None; self.vars.len()];
        let mut seen: HashSet<(usize, bool)> = HashSet::new();
        // `true`: the next symbol is a node
        let mut stack = vec![(self.start, true)];
        seen.insert((self.start, true));
        while let Some((s, expect_node)) = stack.pop() {
            for &(sym, t) in &self.trans[s] {
                let next = match sym {
                    None => (t, expect_node),
                    Some(v) => {
                        let role = if expect_node { Role::Node } else { Role::Edge };
                        match roles[v] {
                            Some(r) if r != role => {
                                return Err(EvalError::RegexUnsatisfiable(format!(
                                    "?{} is used both as a node and as an edge",
                                    self.vars[v]
                                )))
                            }
                            _ => roles[v] = Some(role),
                        }
                        (t, !expect_node)
                    }
                };
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        if seen.contains(&(self.accept, true)) {
            return Err(EvalError::RegexUnsatisfiable(
                "the expression can end on an edge term or match nothing".into(),
            ));
        }
        Ok(roles.into_iter().map(|r| r.unwrap_or(Role::Node)).collect())
    }
}

/// Everything needed to enumerate walks, with classes already resolved.
#[derive(Debug, Clone)]
pub struct PathProblem {
    pub nfa: Nfa,
    pub roles: Vec<Role>,
    pub node_class: Vec<Class<NodeIx>>,
    pub edge_class: Vec<Class<EdgeIx>>,
    pub start: Class<NodeIx>,
    pub end: Class<NodeIx>,
}

impl PathProblem {
    pub fn new(regex: &PathRegex) -> Result<Self, EvalError> {
        let nfa = Nfa::compile(regex);
        let roles = nfa.roles()?;
        let n = nfa.vars.len();
        Ok(PathProblem {
            nfa,
            roles,
            node_class: vec![None; n],
            edge_class: vec![None; n],
            start: None,
            end: None,
        })
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.nfa.vars.iter().position(|v| v == name)
    }

    fn admits_node(&self, v: usize, n: NodeIx) -> bool {
        self.roles[v] == Role::Node && self.node_class[v].as_ref().is_none_or(|c| c.contains(&n))
    }

    fn admits_edge(&self, v: usize, e: EdgeIx) -> bool {
        self.roles[v] == Role::Edge && self.edge_class[v].as_ref().is_none_or(|c| c.contains(&e))
    }

    /// All simple walks matching the expression, ordered by length then
    /// node ids.
    pub fn walks(&self, graph: &TpmGraph, options: &PathOptions) -> Vec<Walk> {
        let adjacency = adjacency(graph, options.orientation);
        let mut found = Vec::new();
        let starts: Vec<NodeIx> = match &self.start {
            Some(s) => s.iter().copied().collect(),
            None => graph.nodes().map(|(ix, _)| ix).collect(),
        };
        let mut visited = vec![false; graph.node_bound()];
        for s in starts {
            let states = self.nfa.step(&self.nfa.initial(), |v| self.admits_node(v, s));
            if states.is_empty() {
                continue;
            }
            let mut walk = Walk {
                nodes: vec![s],
                edges: vec![],
            };
            visited[s.0] = true;
            self.extend(&adjacency, &mut walk, &states, &mut visited, options, &mut found);
            visited[s.0] = false;
        }
        let maximal = options
            .maximal
            .unwrap_or(self.start.is_none() && self.end.is_none());
        if maximal {
            found = keep_maximal(found);
        }
        sort_walks(graph, &mut found);
        found
    }

    fn extend(
        &self,
        adjacency: &HashMap<NodeIx, Vec<(EdgeIx, NodeIx)>>,
        walk: &mut Walk,
        states: &[usize],
        visited: &mut [bool],
        options: &PathOptions,
        found: &mut Vec<Walk>,
    ) {
        let here = *walk.nodes.last().expect("walks are non-empty");
        if self.nfa.accepts(states) && self.end.as_ref().is_none_or(|e| e.contains(&here)) {
            found.push(walk.clone());
        }
        if options.max_path_len.is_some_and(|m| walk.edges.len() >= m) {
            return;
        }
        let Some(next) = adjacency.get(&here) else { return };
        for &(e, n) in next {
            if visited[n.0] {
                continue;
            }
            let after_edge = self.nfa.step(states, |v| self.admits_edge(v, e));
            if after_edge.is_empty() {
                continue;
            }
            let after_node = self.nfa.step(&after_edge, |v| self.admits_node(v, n));
            if after_node.is_empty() {
                continue;
            }
            walk.edges.push(e);
            walk.nodes.push(n);
            visited[n.0] = true;
            self.extend(adjacency, walk, &after_node, visited, options, found);
            visited[n.0] = false;
            walk.edges.pop();
            walk.nodes.pop();
        }
    }
}

/// Outgoing steps per node under the given orientation, in edge order.
pub fn adjacency(graph: &TpmGraph, orientation: Orientation) -> HashMap<NodeIx, Vec<(EdgeIx, NodeIx)>> {
    let mut adj: HashMap<NodeIx, Vec<(EdgeIx, NodeIx)>> = HashMap::new();
    for (e, rec) in graph.edges() {
        let (f, t) = graph.ends(e);
        let (a, b) = match orientation {
            Orientation::Lineage if rec.relation.is_temporal() => (t, f),
            _ => (f, t),
        };
        adj.entry(a).or_default().push((e, b));
    }
    for steps in adj.values_mut() {
        steps.sort();
    }
    adj
}

/// Drop every walk that occurs as a contiguous part of a longer one.
pub fn keep_maximal(walks: Vec<Walk>) -> Vec<Walk> {
    let mut covered: HashSet<(Vec<NodeIx>, Vec<EdgeIx>)> = HashSet::new();
    for w in &walks {
        let n = w.nodes.len();
        for i in 0..n {
            for j in i..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                covered.insert((w.nodes[i..=j].to_vec(), w.edges[i..j].to_vec()));
            }
        }
    }
    walks
        .into_iter()
        .filter(|w| !covered.contains(&(w.nodes.clone(), w.edges.clone())))
        .collect()
}

pub fn sort_walks(graph: &TpmGraph, walks: &mut [Walk]) {
    walks.sort_by(|a, b| {
        (a.len(), a.node_ids(graph), &a.edges).cmp(&(b.len(), b.node_ids(graph), &b.edges))
    });
}

/// Match a `pconstruct` header against `graph`. Patterns about the
/// container variable itself are ignored here.
pub fn match_paths(
    graph: &TpmGraph,
    pc: &Pconstruct,
    scope: Option<Scope>,
    options: &PathOptions,
) -> Result<Vec<Walk>, EvalError> {
    let body = GroupPattern {
        patterns: pc
            .body
            .patterns
            .iter()
            .filter(|p| p.vars().all(|v| v != pc.var))
            .cloned()
            .collect(),
        filters: pc.body.filters.clone(),
    };
    let mut problem = PathProblem::new(&pc.regex)?;
    let mut classes = ClassSolver::new(graph, &body, scope);
    for v in 0..problem.nfa.vars.len() {
        let name = problem.nfa.vars[v].clone();
        check_declared_kind(&body, &name, problem.roles[v])?;
        match problem.roles[v] {
            Role::Node => problem.node_class[v] = classes.nodes(&name)?,
            Role::Edge => problem.edge_class[v] = classes.edges(&name)?,
        }
    }
    problem.start = endpoint_class(graph, &mut classes, pc.start.as_ref())?;
    problem.end = endpoint_class(graph, &mut classes, pc.end.as_ref())?;
    let mut options = options.clone();
    if options.maximal.is_none() {
        options.maximal = Some(pc.start.is_none() && pc.end.is_none());
    }
    Ok(problem.walks(graph, &options))
}

fn endpoint_class(
    graph: &TpmGraph,
    classes: &mut ClassSolver,
    term: Option<&Term>,
) -> Result<Class<NodeIx>, EvalError> {
    Ok(match term {
        None => None,
        Some(Term::Var(v)) => classes.nodes(v)?,
        Some(Term::Const(c)) => {
            let text = match c {
                Value::Text(s) => s.clone(),
                Value::Int(n) => n.to_string(),
                Value::Time(t) => format!("t{t}"),
            };
            let set: BTreeSet<NodeIx> = match graph.index_of(&text) {
                Some(ix) => [ix].into(),
                None => graph
                    .instances_of(&EntityId::new(text))
                    .iter()
                    .filter_map(|n| graph.index_of(&n.id))
                    .collect(),
            };
            Some(set)
        }
    })
}

/// A constant `@isA` on a term that contradicts its position.
fn check_declared_kind(body: &GroupPattern, var: &str, role: Role) -> Result<(), EvalError> {
    use crate::query::Predicate;
    for p in &body.patterns {
        let (Term::Var(s), Predicate::Attr(a), Term::Const(Value::Text(k))) = (&p.subject, &p.predicate, &p.object)
        else {
            continue;
        };
        if s != var || a != "isa" {
            continue;
        }
        let is_edge = k == "edge";
        if is_edge != (role == Role::Edge) {
            let position = if role == Role::Edge { "an edge" } else { "a node" };
            return Err(EvalError::RegexUnsatisfiable(format!(
                "?{var} is declared `{k}` but sits in {position} position"
            )));
        }
    }
    Ok(())
}

/// Solves each connected component of the where-clause once and reports
/// the elements each variable can take.
struct ClassSolver<'a> {
    graph: &'a TpmGraph,
    body: &'a GroupPattern,
    scope: Option<Scope>,
    component: BTreeMap<String, usize>,
    solved: HashMap<usize, super::Solutions>,
}

impl<'a> ClassSolver<'a> {
    fn new(graph: &'a TpmGraph, body: &'a GroupPattern, scope: Option<Scope>) -> Self {
        let mut groups: Vec<BTreeSet<String>> = Vec::new();
        let var_sets = body
            .patterns
            .iter()
            .map(|p| p.vars().map(str::to_owned).collect::<BTreeSet<_>>())
            .chain(body.filters.iter().map(|f| f.vars().into_iter().map(str::to_owned).collect()));
        for vars in var_sets {
            let (mut hit, rest): (Vec<_>, Vec<_>) = groups.into_iter().partition(|g| !g.is_disjoint(&vars));
            let mut merged = vars;
            for g in hit.drain(..) {
                merged.extend(g);
            }
            groups = rest;
            if !merged.is_empty() {
                groups.push(merged);
            }
        }
        let component = groups
            .iter()
            .enumerate()
            .flat_map(|(i, g)| g.iter().map(move |v| (v.clone(), i)))
            .collect();
        ClassSolver {
            graph,
            body,
            scope,
            component,
            solved: HashMap::new(),
        }
    }

    fn solutions(&mut self, var: &str) -> Result<Option<&super::Solutions>, EvalError> {
        let Some(&c) = self.component.get(var) else {
            return Ok(None);
        };
        if !self.solved.contains_key(&c) {
            let in_component = |v: &str| self.component.get(v) == Some(&c);
            let group = GroupPattern {
                patterns: self
                    .body
                    .patterns
                    .iter()
                    .filter(|p| p.vars().any(in_component))
                    .cloned()
                    .collect(),
                filters: self
                    .body
                    .filters
                    .iter()
                    .filter(|f| f.vars().into_iter().any(in_component))
                    .cloned()
                    .collect(),
            };
            let sol = solve(self.graph, &group, self.scope)?;
            self.solved.insert(c, sol);
        }
        Ok(self.solved.get(&c))
    }

    fn nodes(&mut self, var: &str) -> Result<Class<NodeIx>, EvalError> {
        Ok(self.solutions(var)?.map(|s| s.nodes_of(var)))
    }

    fn edges(&mut self, var: &str) -> Result<Class<EdgeIx>, EvalError> {
        Ok(self.solutions(var)?.map(|s| s.edges_of(var)))
    }
}
