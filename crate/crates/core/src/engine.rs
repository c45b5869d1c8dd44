//! Statement execution and the catalog of materialized folder/path nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::{agent_id, AgentMode, AgentRegistration, EvolutionDelta};
use crate::eval::{self, BindingSet, EvalError, PathOptions, Scope, Walk};
use crate::graph::{NodeIx, TpmGraph};
use crate::model::{EdgeRecord, NodeKind, NodeRecord, Relation, Timestamp};
use crate::query::{
    parse_query, Apply, Fconstruct, GroupPattern, MemberSpec, Pconstruct, Select, Statement, Term,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRecord {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterializedNode {
    pub name: String,
    pub kind: NodeKind,
    pub defining_query: Statement,
    pub timed: bool,
    pub members: BTreeSet<String>,
    pub paths: Vec<PathRecord>,
    pub evolution_log: Vec<EvolutionDelta>,
    pub created_at: Timestamp,
    /// Nodes the last evaluation bound to any variable.
    pub watched: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl MaterializedNode {
    pub fn summary(&self) -> String {
        match self.kind {
            NodeKind::PathNode => {
                let n = self.paths.len();
                format!("{} (path, {} path{})", self.name, n, if n == 1 { "" } else { "s" })
            }
            _ => {
                let n = self.members.len();
                format!("{} (folder, {} member{})", self.name, n, if n == 1 { "" } else { "s" })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Rows(BindingSet),
    Materialized(String),
}

#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    pub path: PathOptions,
}

#[derive(Debug, Clone, Default)]
pub struct Engine {
    pub(crate) graph: TpmGraph,
    pub(crate) catalog: BTreeMap<String, MaterializedNode>,
    pub(crate) agents: BTreeMap<String, AgentRegistration>,
    pub(crate) failures: Vec<String>,
    pub options: EngineOptions,
}

/// Result of evaluating a construct's defining query, before installing it.
struct Evaluation {
    members: BTreeSet<NodeIx>,
    walks: Vec<Walk>,
    touched: BTreeSet<NodeIx>,
    attributes: BTreeMap<String, String>,
    timed: bool,
    warnings: Vec<String>,
}

impl Engine {
    pub fn new(graph: TpmGraph) -> Self {
        Engine {
            graph,
            ..Default::default()
        }
    }

    pub fn with_options(mut self, options: EngineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn graph(&self) -> &TpmGraph {
        &self.graph
    }

    /// Direct access for loaders and change feeds. Callers report what
    /// they changed through [`Engine::notify_change`].
    pub fn graph_mut(&mut self) -> &mut TpmGraph {
        &mut self.graph
    }

    pub fn catalog(&self) -> impl Iterator<Item = &MaterializedNode> {
        self.catalog.values()
    }

    pub fn materialized(&self, name: &str) -> Option<&MaterializedNode> {
        self.catalog.get(name)
    }

    /// Restore a catalog saved earlier. Container nodes must already be in
    /// the graph.
    pub fn restore(&mut self, nodes: impl IntoIterator<Item = MaterializedNode>, agents: Vec<AgentRegistration>) {
        for m in nodes {
            self.catalog.insert(m.name.clone(), m);
        }
        for a in agents {
            self.agents.insert(a.agent_id.clone(), a);
        }
    }

    pub fn execute_str(&mut self, text: &str, now: Timestamp) -> Result<Outcome, EvalError> {
        let stmt = parse_query(text)?;
        self.execute(&stmt, now)
    }

    pub fn execute(&mut self, stmt: &Statement, now: Timestamp) -> Result<Outcome, EvalError> {
        match stmt {
            Statement::Select(s) => self.select(s).map(Outcome::Rows),
            Statement::Apply(a) => self.apply(a).map(Outcome::Rows),
            Statement::Fconstruct(_) | Statement::Pconstruct(_) => {
                let name = self.construct(stmt, now)?.name.clone();
                Ok(Outcome::Materialized(name))
            }
        }
    }

    pub fn select(&self, s: &Select) -> Result<BindingSet, EvalError> {
        eval::eval_select(&self.graph, s, None)
    }

    /// Materialize a folder or path node. A timed container gets a pull
    /// agent with interval 1 unless it already has one.
    pub fn construct(&mut self, stmt: &Statement, now: Timestamp) -> Result<&MaterializedNode, EvalError> {
        let name = stmt
            .defines()
            .ok_or_else(|| EvalError::Unsupported("only fconstruct and pconstruct define containers".into()))?
            .to_owned();
        if self.graph.contains_node(&name) && !self.catalog.contains_key(&name) {
            return Err(EvalError::NameCollision(name));
        }
        let ev = self.evaluate(stmt)?;
        let kind = match stmt {
            Statement::Pconstruct(_) => NodeKind::PathNode,
            _ => NodeKind::FolderNode,
        };
        if self.catalog.contains_key(&name) {
            self.graph.remove_node(&name)?;
            self.catalog.remove(&name);
        }
        let members = self.install(&name, kind, &ev, now)?;
        let created = EvolutionDelta::between(now, &BTreeSet::new(), &members);
        let node = MaterializedNode {
            name: name.clone(),
            kind,
            defining_query: stmt.clone(),
            timed: ev.timed,
            members,
            paths: self.path_records(&ev.walks),
            evolution_log: vec![created],
            created_at: now,
            watched: self.ids(&ev.touched),
            warnings: ev.warnings,
        };
        self.catalog.insert(name.clone(), node);
        if ev.timed && !self.agents.contains_key(&agent_id(&name)) {
            // registration cannot fail: the node exists, is timed and has no agent
            let _ = self.register(&name, AgentMode::pull(1));
        }
        Ok(&self.catalog[&name])
    }

    /// Re-run a container's defining query and record the membership delta.
    pub fn refresh(&mut self, name: &str, now: Timestamp) -> Result<EvolutionDelta, EvalError> {
        let stmt = self
            .catalog
            .get(name)
            .ok_or_else(|| EvalError::UnknownContainer(name.to_owned()))?
            .defining_query
            .clone();
        let ev = self.evaluate(&stmt)?;
        let kind = self.catalog[name].kind;
        let members = self.install(name, kind, &ev, now)?;
        let paths = self.path_records(&ev.walks);
        let watched = self.ids(&ev.touched);
        let m = self.catalog.get_mut(name).expect("checked above");
        let delta = EvolutionDelta::between(now, &m.members, &members);
        m.members = members;
        m.paths = paths;
        m.watched = watched;
        m.warnings = ev.warnings;
        if !delta.is_empty() {
            m.evolution_log.push(delta.clone());
        }
        Ok(delta)
    }

    fn ids(&self, nodes: &BTreeSet<NodeIx>) -> BTreeSet<String> {
        nodes.iter().map(|ix| self.graph.node(*ix).id.clone()).collect()
    }

    fn path_records(&self, walks: &[Walk]) -> Vec<PathRecord> {
        walks
            .iter()
            .map(|w| PathRecord {
                nodes: w.node_ids(&self.graph).into_iter().map(str::to_owned).collect(),
                edges: w.edges.iter().map(|e| self.graph.edge(*e).clone()).collect(),
            })
            .collect()
    }

    fn evaluate(&self, stmt: &Statement) -> Result<Evaluation, EvalError> {
        let (var, body) = match stmt {
            Statement::Fconstruct(f) => (&f.var, &f.body),
            Statement::Pconstruct(p) => (&p.var, &p.body),
            _ => unreachable!("constructs only"),
        };
        let name = stmt.defines().expect("constructs define a name");
        let self_ix = self.graph.index_of(name);
        let (attributes, timed) = container_attributes(var, body)?;
        let mut ev = Evaluation {
            members: BTreeSet::new(),
            walks: Vec::new(),
            touched: BTreeSet::new(),
            attributes,
            timed,
            warnings: Vec::new(),
        };
        match stmt {
            Statement::Fconstruct(f) => self.evaluate_folder(f, &mut ev)?,
            Statement::Pconstruct(p) => self.evaluate_path(p, &mut ev)?,
            _ => unreachable!(),
        }
        if let Some(me) = self_ix {
            ev.members.remove(&me);
            ev.touched.remove(&me);
        }
        if ev.members.is_empty() {
            ev.warnings.push(format!("`{name}` has no members"));
        }
        Ok(ev)
    }

    fn evaluate_folder(&self, f: &Fconstruct, ev: &mut Evaluation) -> Result<(), EvalError> {
        if let Some(MemberSpec::Folders(names)) = &f.members {
            for n in names {
                if !self.catalog.contains_key(n) {
                    return Err(EvalError::UnknownContainer(n.clone()));
                }
                let ix = self.graph.index_of(n).ok_or_else(|| EvalError::UnknownContainer(n.clone()))?;
                ev.members.insert(ix);
            }
            ev.touched = ev.members.clone();
            return Ok(());
        }
        let body = without_var(&f.body, &f.var);
        let sol = eval::solve_group(&self.graph, &body, None)?;
        ev.touched = sol.all_nodes();
        ev.members = match &f.members {
            Some(MemberSpec::Vars(vs)) => vs.iter().flat_map(|v| sol.nodes_of(v)).collect(),
            _ => sol.all_nodes(),
        };
        Ok(())
    }

    fn evaluate_path(&self, p: &Pconstruct, ev: &mut Evaluation) -> Result<(), EvalError> {
        let walks = eval::match_paths(&self.graph, p, None, &self.options.path)?;
        for w in &walks {
            ev.members.extend(w.nodes.iter().copied());
        }
        ev.touched = ev.members.clone();
        ev.walks = walks;
        Ok(())
    }

    /// Create or update the container node and its `isPartOf` edges.
    fn install(
        &mut self,
        name: &str,
        kind: NodeKind,
        ev: &Evaluation,
        now: Timestamp,
    ) -> Result<BTreeSet<String>, EvalError> {
        let spans: Vec<(Timestamp, Timestamp)> = ev.members.iter().map(|m| self.graph.node(*m).span()).collect();
        let declared_start = ev.attributes.get("start").and_then(|v| parse_ticks(v));
        let declared_duration = ev.attributes.get("duration").and_then(|v| parse_ticks(v));
        let (start, duration) = match (declared_start, spans.is_empty()) {
            (Some(s), _) => (Timestamp(s), declared_duration.unwrap_or(0)),
            (None, true) => (now, 0),
            (None, false) => {
                let lo = spans.iter().map(|s| s.0).min().expect("non-empty");
                let hi = spans.iter().map(|s| s.1).max().expect("non-empty");
                (lo, hi.0 - lo.0)
            }
        };
        let end = start.0 + duration;
        if declared_start.is_some() {
            if let Some((m, _)) = ev
                .members
                .iter()
                .zip(&spans)
                .find(|(_, (s, e))| s.0 < start.0 || e.0 > end)
            {
                return Err(EvalError::TimeBoundViolation {
                    container: name.to_owned(),
                    member: self.graph.node(*m).id.clone(),
                });
            }
        }
        let member_ids = self.ids(&ev.members);
        match self.graph.index_of(name) {
            Some(cix) => {
                let stale: Vec<_> = self
                    .graph
                    .in_edges(cix)
                    .iter()
                    .copied()
                    .filter(|e| {
                        let rec = self.graph.edge(*e);
                        rec.relation == Relation::IsPartOf && !member_ids.contains(&rec.from)
                    })
                    .collect();
                for e in stale {
                    self.graph.remove_edge(e);
                }
                self.graph.set_span(name, start, duration)?;
                for (k, v) in &ev.attributes {
                    self.graph.set_attribute(name, k, v)?;
                }
            }
            None => {
                let mut node = NodeRecord::container(kind, name, start, duration)
                    .with_id(name)
                    .with_timed(ev.timed);
                node.attributes = ev.attributes.clone();
                self.graph.add_node(node)?;
            }
        }
        for id in &member_ids {
            self.graph.add_edge(EdgeRecord::new(id.as_str(), Relation::IsPartOf, name))?;
        }
        Ok(member_ids)
    }

    /// Run the inner select against each scope container's members. Path
    /// nodes are queried one path at a time.
    pub fn apply(&self, a: &Apply) -> Result<BindingSet, EvalError> {
        let mut out = BindingSet::default();
        let mut index = Vec::new();
        let mut next_path = 1;
        let mut any_path = false;
        for name in &a.scope {
            let m = self
                .catalog
                .get(name)
                .ok_or_else(|| EvalError::UnknownContainer(name.clone()))?;
            let c = self
                .graph
                .node_by_id(name)
                .ok_or_else(|| EvalError::UnknownContainer(name.clone()))?;
            let scope: Scope = (c.time().0, c.duration.unwrap_or(0));
            let mut push = |rows: BindingSet, path: usize| {
                out.vars = rows.vars;
                index.extend(std::iter::repeat_n(path, rows.rows.len()));
                out.rows.extend(rows.rows);
            };
            if m.kind == NodeKind::PathNode {
                any_path = true;
                for p in &m.paths {
                    let nodes: Vec<NodeIx> = p.nodes.iter().filter_map(|id| self.graph.index_of(id)).collect();
                    let edges = p.edges.iter().filter_map(|e| {
                        let f = self.graph.index_of(&e.from)?;
                        let t = self.graph.index_of(&e.to)?;
                        self.graph.find_edge(f, e.relation, t)
                    });
                    let sub = self.graph.restricted(nodes, edges);
                    push(eval::eval_select(&sub, &a.inner, Some(scope))?, next_path);
                    next_path += 1;
                }
            } else {
                let nodes = m.members.iter().filter_map(|id| self.graph.index_of(id));
                let sub = self.graph.induced(nodes);
                push(eval::eval_select(&sub, &a.inner, Some(scope))?, 0);
            }
        }
        if out.vars.is_empty() {
            out.vars = match &a.inner.projection {
                crate::query::Projection::Vars(vs) => vs.clone(),
                crate::query::Projection::All => a.inner.body.pattern_vars().into_iter().map(str::to_owned).collect(),
            };
        }
        if any_path {
            out.path_index = Some(index);
        }
        Ok(out)
    }
}

fn without_var(body: &GroupPattern, var: &str) -> GroupPattern {
    GroupPattern {
        patterns: body.patterns.iter().filter(|p| p.vars().all(|v| v != var)).cloned().collect(),
        filters: body.filters.clone(),
    }
}

/// Attributes declared on the container variable, and whether it is timed.
fn container_attributes(var: &str, body: &GroupPattern) -> Result<(BTreeMap<String, String>, bool), EvalError> {
    let mut attrs = BTreeMap::new();
    let mut timed = false;
    for p in &body.patterns {
        if p.subject.var() != Some(var) {
            if p.object.var() == Some(var) {
                return Err(EvalError::Unsupported(format!(
                    "?{var} names the container and cannot be used as an object"
                )));
            }
            continue;
        }
        let crate::query::Predicate::Attr(key) = &p.predicate else {
            return Err(EvalError::Unsupported(format!("?{var} can only take attributes")));
        };
        let Term::Const(value) = &p.object else {
            return Err(EvalError::Unsupported(format!("attribute @{key} of ?{var} must be a constant")));
        };
        let value = eval::Val::from(value.clone()).to_string();
        match key.as_str() {
            "isa" => {}
            "timed" => timed = value.eq_ignore_ascii_case("true"),
            _ => {
                attrs.insert(key.clone(), value);
            }
        }
    }
    Ok((attrs, timed))
}

fn parse_ticks(v: &str) -> Option<u64> {
    v.strip_prefix('t').unwrap_or(v).parse().ok()
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Rows(rows) => f.write_str(&rows.to_tsv()),
            Outcome::Materialized(name) => writeln!(f, "materialized {name}"),
        }
    }
}
