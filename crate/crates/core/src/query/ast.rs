use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::Relation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    Select(Select),
    Fconstruct(Fconstruct),
    Pconstruct(Pconstruct),
    Apply(Apply),
}

impl Statement {
    /// Name of the container a construct statement defines.
    pub fn defines(&self) -> Option<&str> {
        match self {
            Statement::Fconstruct(f) => Some(&f.name),
            Statement::Pconstruct(p) => Some(&p.name),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Select {
    /// `false` only for an explicit `select all`.
    pub distinct: bool,
    pub projection: Projection,
    pub body: GroupPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    All,
    Vars(Vec<String>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPattern {
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<FilterExpr>,
}

impl GroupPattern {
    pub fn pattern_vars(&self) -> BTreeSet<&str> {
        self.patterns.iter().flat_map(|p| p.vars()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: Predicate,
    pub object: Term,
}

impl TriplePattern {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.object].into_iter().filter_map(Term::var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

/// Literal values written in a query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Text(String),
    Int(u64),
    Time(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    /// `@name`, lower-cased.
    Attr(String),
    Rel(Relation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterExpr {
    Or(Box<FilterExpr>, Box<FilterExpr>),
    And(Box<FilterExpr>, Box<FilterExpr>),
    Not(Box<FilterExpr>),
    Cmp(CmpOp, Operand, Operand),
    TimeSemantic { fact: Operand, spec: TimeSpec },
}

impl FilterExpr {
    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            FilterExpr::Or(a, b) | FilterExpr::And(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            FilterExpr::Not(a) => a.collect_vars(out),
            FilterExpr::Cmp(_, l, r) => {
                out.extend(l.var());
                out.extend(r.var());
            }
            FilterExpr::TimeSemantic { fact, .. } => out.extend(fact.var()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operand {
    Var(String),
    Const(Value),
    /// Arithmetic over instants, or a bare `t` / `d` inside `apply`.
    Time(TimeExpr),
}

impl Operand {
    pub fn var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeSpec {
    /// `[s1, s2, s3, s4]`; `None` is `?`.
    Interval([Option<TimeExpr>; 4]),
    Keyword { keyword: TimeKeyword, args: Vec<TimeExpr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeKeyword {
    In,
    On,
    At,
    During,
    Since,
    After,
    Before,
    Till,
    Until,
    By,
    Between,
}

impl TimeKeyword {
    pub const ALL: [TimeKeyword; 11] = [
        TimeKeyword::In,
        TimeKeyword::On,
        TimeKeyword::At,
        TimeKeyword::During,
        TimeKeyword::Since,
        TimeKeyword::After,
        TimeKeyword::Before,
        TimeKeyword::Till,
        TimeKeyword::Until,
        TimeKeyword::By,
        TimeKeyword::Between,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeKeyword::In => "in",
            TimeKeyword::On => "on",
            TimeKeyword::At => "at",
            TimeKeyword::During => "during",
            TimeKeyword::Since => "since",
            TimeKeyword::After => "after",
            TimeKeyword::Before => "before",
            TimeKeyword::Till => "till",
            TimeKeyword::Until => "until",
            TimeKeyword::By => "by",
            TimeKeyword::Between => "between",
        }
    }

    /// Case-insensitive; `untill` is accepted as a spelling of `until`.
    pub fn from_name(s: &str) -> Option<TimeKeyword> {
        let lower = s.to_ascii_lowercase();
        if lower == "untill" {
            return Some(TimeKeyword::Until);
        }
        TimeKeyword::ALL.into_iter().find(|k| k.name() == lower)
    }

    pub fn arity(self) -> usize {
        if self == TimeKeyword::Between {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeExpr {
    /// The first term is always added.
    pub terms: Vec<(Sign, TimeAtom)>,
}

impl TimeExpr {
    pub fn atom(a: TimeAtom) -> Self {
        TimeExpr {
            terms: vec![(Sign::Plus, a)],
        }
    }

    pub fn uses_scope(&self) -> bool {
        self.terms
            .iter()
            .any(|(_, a)| matches!(a, TimeAtom::ScopeStart | TimeAtom::ScopeDuration))
    }

    /// Evaluate against an optional `apply` scope `(t, d)`. `None` when a
    /// scope variable is unavailable or the sum drops below zero.
    pub fn eval(&self, scope: Option<(u64, u64)>) -> Option<u64> {
        let mut acc: i128 = 0;
        for (sign, atom) in &self.terms {
            let v = match atom {
                TimeAtom::Ticks(n) | TimeAtom::Instant(n) => *n,
                TimeAtom::ScopeStart => scope?.0,
                TimeAtom::ScopeDuration => scope?.1,
            } as i128;
            match sign {
                Sign::Plus => acc += v,
                Sign::Minus => acc -= v,
            }
        }
        u64::try_from(acc).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeAtom {
    /// A bare number of ticks.
    Ticks(u64),
    /// `t<k>`
    Instant(u64),
    /// `t` inside `apply`: start of the scope container.
    ScopeStart,
    /// `d` inside `apply`: duration of the scope container.
    ScopeDuration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fconstruct {
    pub name: String,
    pub var: String,
    pub members: Option<MemberSpec>,
    pub body: GroupPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemberSpec {
    /// `select ?a ?b`: members are the nodes bound to these variables.
    Vars(Vec<String>),
    /// `select (F1, F2)`: union of existing folders.
    Folders(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pconstruct {
    pub name: String,
    pub var: String,
    pub start: Option<Term>,
    pub end: Option<Term>,
    pub regex: PathRegex,
    pub body: GroupPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathRegex {
    Term(String),
    Seq(Vec<PathRegex>),
    Alt(Vec<PathRegex>),
    Star(Box<PathRegex>),
    Plus(Box<PathRegex>),
    Opt(Box<PathRegex>),
}

impl PathRegex {
    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            PathRegex::Term(v) => {
                out.insert(v);
            }
            PathRegex::Seq(xs) | PathRegex::Alt(xs) => xs.iter().for_each(|x| x.collect(out)),
            PathRegex::Star(x) | PathRegex::Plus(x) | PathRegex::Opt(x) => x.collect(out),
        }
    }

    /// Build a sequence, flattening nested sequences and unwrapping singletons.
    pub fn seq(items: Vec<PathRegex>) -> PathRegex {
        Self::flatten(items, true)
    }

    pub fn alt(items: Vec<PathRegex>) -> PathRegex {
        Self::flatten(items, false)
    }

    fn flatten(items: Vec<PathRegex>, seq: bool) -> PathRegex {
        let mut out = Vec::new();
        for item in items {
            match item {
                PathRegex::Seq(xs) if seq => out.extend(xs),
                PathRegex::Alt(xs) if !seq => out.extend(xs),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            return out.pop().expect("one item");
        }
        if seq {
            PathRegex::Seq(out)
        } else {
            PathRegex::Alt(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Apply {
    pub scope: Vec<String>,
    pub inner: Select,
}
