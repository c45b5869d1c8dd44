//! Conjunctive pattern matching with filters.

use std::collections::BTreeSet;

use super::{cmp_vals, edge_attribute, is_edge_attribute, node_attribute, Cell, EvalError, Scope, Val};
use crate::graph::{EdgeIx, NodeIx, TpmGraph};
use crate::model::{EntityId, Relation, Timestamp};
use crate::query::time::{instantiate, keyword_template};
use crate::query::{
    span_filter, time_filter, CmpOp, FilterExpr, GroupPattern, Interval, Operand, Predicate, Term, TimeExpr,
    TimeSpec, TriplePattern, Value,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Bound {
    Node(NodeIx),
    Edge(EdgeIx),
    Val(Val),
}

pub(crate) type Row = Vec<Option<Bound>>;

/// Raw solutions of a group pattern, before projection.
#[derive(Debug, Clone)]
pub struct Solutions {
    pub vars: Vec<String>,
    pub(crate) rows: Vec<Row>,
}

impl Solutions {
    pub fn index(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub(crate) fn cell(&self, graph: &TpmGraph, row: &Row, col: usize) -> Cell {
        match &row[col] {
            Some(Bound::Node(ix)) => Cell::Node(graph.node(*ix).id.clone()),
            Some(Bound::Edge(ix)) => {
                let e = graph.edge(*ix);
                Cell::Edge {
                    from: e.from.clone(),
                    relation: e.relation,
                    to: e.to.clone(),
                }
            }
            Some(Bound::Val(v)) => Cell::Value(v.clone()),
            None => Cell::Unbound,
        }
    }

    /// Nodes bound to `var` across all solutions.
    pub fn nodes_of(&self, var: &str) -> BTreeSet<NodeIx> {
        let Some(i) = self.index(var) else {
            return BTreeSet::new();
        };
        self.rows
            .iter()
            .filter_map(|r| match r[i] {
                Some(Bound::Node(ix)) => Some(ix),
                _ => None,
            })
            .collect()
    }

    pub fn edges_of(&self, var: &str) -> BTreeSet<EdgeIx> {
        let Some(i) = self.index(var) else {
            return BTreeSet::new();
        };
        self.rows
            .iter()
            .filter_map(|r| match r[i] {
                Some(Bound::Edge(ix)) => Some(ix),
                _ => None,
            })
            .collect()
    }

    /// Every node bound to any variable.
    pub fn all_nodes(&self) -> BTreeSet<NodeIx> {
        self.rows
            .iter()
            .flatten()
            .filter_map(|b| match b {
                Some(Bound::Node(ix)) => Some(*ix),
                _ => None,
            })
            .collect()
    }
}

pub(crate) fn solve(graph: &TpmGraph, group: &GroupPattern, scope: Option<Scope>) -> Result<Solutions, EvalError> {
    let mut vars: Vec<String> = Vec::new();
    let names = group
        .patterns
        .iter()
        .flat_map(|p| p.vars())
        .chain(group.filters.iter().flat_map(|f| f.vars()));
    for v in names {
        if !vars.iter().any(|x| x == v) {
            vars.push(v.to_owned());
        }
    }
    let ctx = Ctx { graph, vars: &vars, scope };
    let filter_vars: Vec<Vec<usize>> = group
        .filters
        .iter()
        .map(|f| f.vars().into_iter().map(|v| ctx.index(v)).collect())
        .collect();
    let mut bound = vec![false; vars.len()];
    let mut applied = vec![false; group.filters.len()];
    let mut rows: Vec<Row> = vec![vec![None; vars.len()]];
    rows = ctx.apply_ready(group, &filter_vars, &bound, &mut applied, rows)?;
    for pi in plan(&group.patterns) {
        if rows.is_empty() {
            break;
        }
        let p = &group.patterns[pi];
        let mut next = Vec::new();
        for row in &rows {
            ctx.match_pattern(p, row, &mut next);
        }
        rows = next;
        for v in p.vars() {
            bound[ctx.index(v)] = true;
        }
        rows = ctx.apply_ready(group, &filter_vars, &bound, &mut applied, rows)?;
    }
    Ok(Solutions { vars, rows })
}

/// Most selective pattern first: patterns whose subject is already known
/// beat those with only a known object, which beat open scans.
fn plan(patterns: &[TriplePattern]) -> Vec<usize> {
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut remaining: Vec<usize> = (0..patterns.len()).collect();
    let mut order = Vec::with_capacity(patterns.len());
    let known = |t: &Term, bound: &BTreeSet<&str>| match t {
        Term::Var(v) => bound.contains(v.as_str()),
        Term::Const(_) => true,
    };
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .min_by_key(|(_, &i)| {
                let p = &patterns[i];
                let rel = matches!(p.predicate, Predicate::Rel(_));
                let cost = match (known(&p.subject, &bound), known(&p.object, &bound)) {
                    (true, true) => 0,
                    (true, false) => 1,
                    (false, true) if rel => 1,
                    (false, true) => 2,
                    (false, false) => 3,
                };
                (cost, i)
            })
            .expect("non-empty");
        let i = remaining.remove(pos);
        bound.extend(patterns[i].vars());
        order.push(i);
    }
    order
}

enum Slot<'a> {
    Known(Bound),
    Const(&'a Value),
    Free(usize),
}

struct Ctx<'a> {
    graph: &'a TpmGraph,
    vars: &'a [String],
    scope: Option<Scope>,
}

impl Ctx<'_> {
    fn index(&self, var: &str) -> usize {
        self.vars.iter().position(|v| v == var).expect("variable collected")
    }

    fn slot<'t>(&self, term: &'t Term, row: &Row) -> Slot<'t> {
        match term {
            Term::Const(v) => Slot::Const(v),
            Term::Var(name) => {
                let i = self.index(name);
                match &row[i] {
                    Some(b) => Slot::Known(b.clone()),
                    None => Slot::Free(i),
                }
            }
        }
    }

    /// Nodes named by a constant: the node with that id, else every
    /// instance of the entity with that id.
    fn const_nodes(&self, v: &Value) -> Vec<NodeIx> {
        let text = match v {
            Value::Text(s) => s.clone(),
            Value::Int(n) => n.to_string(),
            Value::Time(t) => format!("t{t}"),
        };
        if let Some(ix) = self.graph.index_of(&text) {
            return vec![ix];
        }
        self.graph
            .instances_of(&EntityId::new(text))
            .into_iter()
            .filter_map(|n| self.graph.index_of(&n.id))
            .collect()
    }

    fn match_pattern(&self, p: &TriplePattern, row: &Row, out: &mut Vec<Row>) {
        let subject = self.slot(&p.subject, row);
        let object = self.slot(&p.object, row);
        match &p.predicate {
            Predicate::Attr(name) => self.match_attr(name, subject, object, row, out),
            Predicate::Rel(rel) => self.match_rel(*rel, subject, object, row, out),
        }
    }

    fn match_attr(&self, name: &str, subject: Slot, object: Slot, row: &Row, out: &mut Vec<Row>) {
        let g = self.graph;
        let subjects: Vec<Bound> = match &subject {
            Slot::Known(b @ (Bound::Node(_) | Bound::Edge(_))) => vec![b.clone()],
            Slot::Known(Bound::Val(_)) => vec![],
            Slot::Const(v) => self.const_nodes(v).into_iter().map(Bound::Node).collect(),
            Slot::Free(_) => {
                let mut all: Vec<Bound> = g.nodes().map(|(ix, _)| Bound::Node(ix)).collect();
                if is_edge_attribute(name) {
                    all.extend(g.edges().map(|(ix, _)| Bound::Edge(ix)));
                }
                all
            }
        };
        for s in subjects {
            let value = match &s {
                Bound::Node(ix) => node_attribute(g, *ix, name),
                Bound::Edge(ix) => edge_attribute(g, *ix, name),
                Bound::Val(_) => None,
            };
            let Some(value) = value else { continue };
            let mut row = row.clone();
            if let Slot::Free(i) = subject {
                row[i] = Some(s.clone());
            }
            let ok = match &object {
                Slot::Const(c) => value.matches(&Val::from((*c).clone())),
                Slot::Known(b) => self.bound_matches(b, &value),
                Slot::Free(i) => match &row[*i] {
                    // the object variable is the subject variable
                    Some(b) => self.bound_matches(b, &value),
                    None => {
                        row[*i] = Some(Bound::Val(value));
                        true
                    }
                },
            };
            if ok {
                out.push(row);
            }
        }
    }

    fn bound_matches(&self, b: &Bound, value: &Val) -> bool {
        match b {
            Bound::Val(v) => v.matches(value),
            Bound::Node(ix) => Val::Text(self.graph.node(*ix).id.clone()).matches(value),
            Bound::Edge(_) => false,
        }
    }

    fn node_choices(&self, slot: &Slot) -> Option<Vec<NodeIx>> {
        match slot {
            Slot::Known(Bound::Node(ix)) => Some(vec![*ix]),
            Slot::Known(_) => Some(vec![]),
            Slot::Const(v) => Some(self.const_nodes(v)),
            Slot::Free(_) => None,
        }
    }

    fn match_rel(&self, rel: Relation, subject: Slot, object: Slot, row: &Row, out: &mut Vec<Row>) {
        let g = self.graph;
        let from = self.node_choices(&subject);
        let to = self.node_choices(&object);
        let mut pairs: Vec<(NodeIx, NodeIx)> = Vec::new();
        let relation_ok = |e: &EdgeIx| g.edge(*e).relation == rel;
        match (&from, &to) {
            (Some(fs), _) => {
                for &f in fs {
                    for e in g.out_edges(f).iter().filter(|e| relation_ok(e)) {
                        let (_, t) = g.ends(*e);
                        if to.as_ref().is_none_or(|ts| ts.contains(&t)) {
                            pairs.push((f, t));
                        }
                    }
                }
            }
            (None, Some(ts)) => {
                for &t in ts {
                    for e in g.in_edges(t).iter().filter(|e| relation_ok(e)) {
                        pairs.push((g.ends(*e).0, t));
                    }
                }
            }
            (None, None) => {
                pairs.extend(
                    g.edges()
                        .filter(|(_, rec)| rec.relation == rel)
                        .map(|(e, _)| g.ends(e)),
                );
            }
        }
        for (f, t) in pairs {
            let mut row = row.clone();
            if bind(&mut row, &subject, Bound::Node(f)) && bind(&mut row, &object, Bound::Node(t)) {
                out.push(row);
            }
        }
    }

    fn apply_ready(
        &self,
        group: &GroupPattern,
        filter_vars: &[Vec<usize>],
        bound: &[bool],
        applied: &mut [bool],
        mut rows: Vec<Row>,
    ) -> Result<Vec<Row>, EvalError> {
        for (fi, f) in group.filters.iter().enumerate() {
            if applied[fi] || !filter_vars[fi].iter().all(|&v| bound[v]) {
                continue;
            }
            applied[fi] = true;
            let mut kept = Vec::with_capacity(rows.len());
            for row in rows {
                if self.filter(f, &row)? {
                    kept.push(row);
                }
            }
            rows = kept;
        }
        Ok(rows)
    }

    fn filter(&self, f: &FilterExpr, row: &Row) -> Result<bool, EvalError> {
        Ok(match f {
            FilterExpr::Or(a, b) => self.filter(a, row)? || self.filter(b, row)?,
            FilterExpr::And(a, b) => self.filter(a, row)? && self.filter(b, row)?,
            FilterExpr::Not(a) => !self.filter(a, row)?,
            FilterExpr::Cmp(op, l, r) => {
                let ord = cmp_vals(&self.operand(l, row)?, &self.operand(r, row)?)?;
                match op {
                    CmpOp::Eq => ord.is_eq(),
                    CmpOp::Ne => ord.is_ne(),
                    CmpOp::Lt => ord.is_lt(),
                    CmpOp::Le => ord.is_le(),
                    CmpOp::Gt => ord.is_gt(),
                    CmpOp::Ge => ord.is_ge(),
                }
            }
            FilterExpr::TimeSemantic { fact, spec } => {
                let interval = self.interval(spec)?;
                let fact = match fact {
                    Operand::Var(v) => match &row[self.index(v)] {
                        Some(Bound::Node(ix)) => {
                            let n = self.graph.node(*ix);
                            if n.kind.is_container() {
                                Val::Span(n.time(), n.duration.unwrap_or(0))
                            } else {
                                Val::Time(n.time())
                            }
                        }
                        _ => self.operand(fact, row)?,
                    },
                    other => self.operand(other, row)?,
                };
                match fact {
                    Val::Time(t) => time_filter(t, &interval),
                    Val::Int(n) => time_filter(Timestamp(n), &interval),
                    Val::Span(s, d) => span_filter(s, Timestamp(s.0 + d), &interval),
                    Val::Text(s) => {
                        return Err(EvalError::TypeError(format!("`{s}` is not a time")));
                    }
                }
            }
        })
    }

    fn operand(&self, op: &Operand, row: &Row) -> Result<Val, EvalError> {
        match op {
            Operand::Const(v) => Ok(Val::from(v.clone())),
            Operand::Time(e) => Ok(Val::Time(self.time(e)?)),
            Operand::Var(name) => match &row[self.index(name)] {
                Some(Bound::Val(v)) => Ok(v.clone()),
                Some(Bound::Node(ix)) => Ok(Val::Text(self.graph.node(*ix).id.clone())),
                Some(Bound::Edge(ix)) => Ok(Val::Text(self.graph.edge(*ix).to_string())),
                None => Err(EvalError::TypeError(format!("?{name} is unbound"))),
            },
        }
    }

    fn time(&self, e: &TimeExpr) -> Result<Timestamp, EvalError> {
        if e.uses_scope() && self.scope.is_none() {
            return Err(EvalError::NoScope);
        }
        e.eval(self.scope)
            .map(Timestamp)
            .ok_or_else(|| EvalError::TypeError("time expression is negative".into()))
    }

    fn interval(&self, spec: &TimeSpec) -> Result<Interval, EvalError> {
        match spec {
            TimeSpec::Interval(slots) => {
                let mut out: Interval = [None; 4];
                for (o, s) in out.iter_mut().zip(slots) {
                    if let Some(e) = s {
                        *o = Some(self.time(e)?);
                    }
                }
                Ok(out)
            }
            TimeSpec::Keyword { keyword, args } => {
                let args = args.iter().map(|a| self.time(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(instantiate(keyword_template(*keyword), &args))
            }
        }
    }
}

fn bind(row: &mut Row, slot: &Slot, value: Bound) -> bool {
    match slot {
        Slot::Free(i) => match &row[*i] {
            Some(existing) => *existing == value,
            None => {
                row[*i] = Some(value);
                true
            }
        },
        _ => true,
    }
}

impl From<Value> for Val {
    fn from(v: Value) -> Self {
        match v {
            Value::Text(s) => Val::Text(s),
            Value::Int(n) => Val::Int(n),
            Value::Time(t) => Val::Time(Timestamp(t)),
        }
    }
}
