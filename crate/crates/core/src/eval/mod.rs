//! Query evaluation over a [`TpmGraph`].

mod bgp;
pub mod path;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeIx, GraphError, NodeIx, TpmGraph};
use crate::model::{NodeKind, Relation, Timestamp};
use crate::query::{GroupPattern, Projection, QueryError, Select};

pub use bgp::Solutions;
pub use path::{match_paths, Orientation, PathOptions, Walk};

/// Scope of an `apply`: start and duration of the container, the `t` and
/// `d` of time expressions.
pub type Scope = (u64, u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("type error: {0}")]
    TypeError(String),
    #[error("`t` and `d` are only defined inside `apply`")]
    NoScope,
    #[error("name `{0}` is already used by a graph node")]
    NameCollision(String),
    #[error("member `{member}` lies outside the declared window of `{container}`")]
    TimeBoundViolation { container: String, member: String },
    #[error("path expression cannot match: {0}")]
    RegexUnsatisfiable(String),
    #[error("unknown folder or path node `{0}`")]
    UnknownContainer(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A value produced by an attribute lookup or a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Val {
    Text(String),
    Int(u64),
    Time(Timestamp),
    /// Start and duration of a folder or path node.
    Span(Timestamp, u64),
}

impl Val {
    fn kind_name(&self) -> &'static str {
        match self {
            Val::Text(_) => "text",
            Val::Int(_) => "integer",
            Val::Time(_) => "timestamp",
            Val::Span(..) => "interval",
        }
    }

    fn lexical(&self) -> String {
        match self {
            Val::Text(s) => s.clone(),
            Val::Int(n) => n.to_string(),
            Val::Time(t) => format!("t{}", t.0),
            Val::Span(s, d) => format!("t{}+{}", s.0, d),
        }
    }

    fn ticks(&self) -> Option<u64> {
        match self {
            Val::Int(n) => Some(*n),
            Val::Time(t) => Some(t.0),
            _ => None,
        }
    }

    /// Equality used when matching patterns: numbers and times compare by
    /// value, anything else by its text form.
    pub fn matches(&self, other: &Val) -> bool {
        match (self.ticks(), other.ticks()) {
            (Some(a), Some(b)) => a == b,
            _ => self.lexical() == other.lexical(),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lexical())
    }
}

/// One output column value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cell {
    Node(String),
    Edge {
        from: String,
        relation: Relation,
        to: String,
    },
    Value(Val),
    Unbound,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Node(id) => f.write_str(id),
            Cell::Edge { from, relation, to } => write!(f, "{from} {relation} {to}"),
            Cell::Value(v) => v.fmt(f),
            Cell::Unbound => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingSet {
    pub vars: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Per-row path index, set when the rows come from an `apply` over a
    /// path node.
    pub path_index: Option<Vec<usize>>,
}

impl BindingSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, var: &str) -> Option<Vec<&Cell>> {
        let i = self.vars.iter().position(|v| v == var)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Tab-separated rendering with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if self.path_index.is_some() {
            out.push_str("path\t");
        }
        out.push_str(&self.vars.join("\t"));
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(ix) = &self.path_index {
                out.push_str(&format!("path:{}\t", ix[i]));
            }
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Attribute lookup on a node, including the virtual attributes
/// `isA`, `type`, `id`, `timestamp`, `start`, `duration`, `timed` and `node`.
pub fn node_attribute(graph: &TpmGraph, ix: NodeIx, name: &str) -> Option<Val> {
    let n = graph.node(ix);
    let text = |s: &str| Some(Val::Text(s.to_owned()));
    let stored = || {
        n.attributes
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| Val::Text(v.clone()))
    };
    match name {
        "isa" => text(match n.kind {
            NodeKind::FolderNode => "folderNode",
            NodeKind::PathNode => "pathNode",
            _ => "entityNode",
        }),
        "type" if !n.kind.is_container() => text(n.kind.token()),
        "id" => text(n.entity.as_str()),
        "node" => text(&n.id),
        "timestamp" if n.kind.is_container() => {
            Some(Val::Span(n.time(), n.duration.unwrap_or(0)))
        }
        "timestamp" | "start" => Some(Val::Time(n.time())),
        "duration" => Some(Val::Int(n.duration.unwrap_or(0))),
        "timed" if n.kind.is_container() => text(if n.timed { "true" } else { "false" }),
        _ => stored(),
    }
}

pub fn edge_attribute(graph: &TpmGraph, ix: EdgeIx, name: &str) -> Option<Val> {
    let e = graph.edge(ix);
    match name {
        "isa" => Some(Val::Text("edge".into())),
        "label" => Some(Val::Text(e.relation.name().into())),
        "weight" => e.weight.map(Val::Int),
        _ => None,
    }
}

pub fn is_edge_attribute(name: &str) -> bool {
    matches!(name, "isa" | "label" | "weight")
}

/// Solutions of a where-clause, before projection.
pub fn solve_group(graph: &TpmGraph, group: &GroupPattern, scope: Option<Scope>) -> Result<Solutions, EvalError> {
    bgp::solve(graph, group, scope)
}

/// Evaluate a `select` against `graph`. `scope` supplies `t` and `d`.
pub fn eval_select(graph: &TpmGraph, select: &Select, scope: Option<Scope>) -> Result<BindingSet, EvalError> {
    let sol = bgp::solve(graph, &select.body, scope)?;
    let vars: Vec<String> = match &select.projection {
        Projection::All => sol.vars.clone(),
        Projection::Vars(vs) => vs.clone(),
    };
    let cols: Vec<usize> = vars
        .iter()
        .map(|v| sol.index(v).expect("projection checked by the parser"))
        .collect();
    let mut rows: Vec<Vec<Cell>> = sol
        .rows
        .iter()
        .map(|row| cols.iter().map(|&c| sol.cell(graph, row, c)).collect())
        .collect();
    rows.sort();
    if select.distinct {
        rows.dedup();
    }
    Ok(BindingSet {
        vars,
        rows,
        path_index: None,
    })
}

fn cmp_vals(a: &Val, b: &Val) -> Result<Ordering, EvalError> {
    match (a, b) {
        (x, y) if x.ticks().is_some() && y.ticks().is_some() => Ok(x.ticks().cmp(&y.ticks())),
        (Val::Text(x), Val::Text(y)) => Ok(x.cmp(y)),
        (Val::Span(..), Val::Span(..)) => Ok(a.cmp(b)),
        _ => Err(EvalError::TypeError(format!(
            "cannot compare {} with {}",
            a.kind_name(),
            b.kind_name()
        ))),
    }
}
