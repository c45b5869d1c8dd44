use std::fmt::Write as _;

use super::ast::*;
use super::lexer::{ident_len, is_ident_char, is_ident_start, time_literal};

/// Render a statement in canonical form. Parsing the output yields the
/// same AST.
pub fn print_query(stmt: &Statement) -> String {
    let mut out = String::new();
    match stmt {
        Statement::Select(s) => select(&mut out, s),
        Statement::Fconstruct(f) => {
            let _ = write!(out, "fconstruct {} as ?{}", name(&f.name), f.var);
            match &f.members {
                Some(MemberSpec::Vars(vs)) => {
                    out.push_str(" select");
                    for v in vs {
                        let _ = write!(out, " ?{v}");
                    }
                }
                Some(MemberSpec::Folders(fs)) => {
                    let names: Vec<String> = fs.iter().map(|f| name(f)).collect();
                    let _ = write!(out, " select ({})", names.join(", "));
                }
                None => {}
            }
            out.push_str(" where ");
            group(&mut out, &f.body);
        }
        Statement::Pconstruct(p) => {
            let end = |t: &Option<Term>| t.as_ref().map(term).unwrap_or_default();
            let _ = write!(
                out,
                "pconstruct {} ({}, {}, {}) as ?{} where ",
                name(&p.name),
                end(&p.start),
                end(&p.end),
                regex(&p.regex),
                p.var
            );
            group(&mut out, &p.body);
        }
        Statement::Apply(a) => {
            let names: Vec<String> = a.scope.iter().map(|n| name(n)).collect();
            let _ = write!(out, "({}) apply (", names.join(", "));
            select(&mut out, &a.inner);
            out.push(')');
        }
    }
    out
}

fn select(out: &mut String, s: &Select) {
    out.push_str("select ");
    if !s.distinct {
        out.push_str("all ");
    }
    match &s.projection {
        Projection::All => out.push('*'),
        Projection::Vars(vs) => {
            let vs: Vec<String> = vs.iter().map(|v| format!("?{v}")).collect();
            out.push_str(&vs.join(" "));
        }
    }
    out.push_str(" where ");
    group(out, &s.body);
}

fn group(out: &mut String, g: &GroupPattern) {
    out.push('{');
    for p in &g.patterns {
        let pred = match &p.predicate {
            Predicate::Attr(a) => format!("@{a}"),
            Predicate::Rel(r) => r.name().to_owned(),
        };
        let _ = write!(out, "\n  {} {} {} .", term(&p.subject), pred, term(&p.object));
    }
    for f in &g.filters {
        let _ = write!(out, "\n  filter({})", filter(f));
    }
    out.push_str("\n}");
}

fn is_bare(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_ident_start)
        && chars.all(is_ident_char)
        && time_literal(s).is_none()
        && ident_len(&s.chars().collect::<Vec<_>>(), 0) == s.chars().count()
}

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn name(s: &str) -> String {
    if is_bare(s) {
        s.to_owned()
    } else {
        quoted(s)
    }
}

fn value(v: &Value, bare_text: bool) -> String {
    match v {
        Value::Text(s) if bare_text && is_bare(s) => s.clone(),
        Value::Text(s) => quoted(s),
        Value::Int(n) => n.to_string(),
        Value::Time(t) => format!("t{t}"),
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("?{v}"),
        Term::Const(v) => value(v, true),
    }
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Var(v) => format!("?{v}"),
        Operand::Const(v) => value(v, false),
        Operand::Time(e) => time_expr(e),
    }
}

fn time_expr(e: &TimeExpr) -> String {
    let mut out = String::new();
    for (i, (sign, atom)) in e.terms.iter().enumerate() {
        if i > 0 {
            out.push_str(match sign {
                Sign::Plus => " + ",
                Sign::Minus => " - ",
            });
        }
        match atom {
            TimeAtom::Ticks(n) => {
                let _ = write!(out, "{n}");
            }
            TimeAtom::Instant(t) => {
                let _ = write!(out, "t{t}");
            }
            TimeAtom::ScopeStart => out.push('t'),
            TimeAtom::ScopeDuration => out.push('d'),
        }
    }
    out
}

fn filter(f: &FilterExpr) -> String {
    // Operands of `||` and `&&` are parenthesised whenever they are
    // themselves binary, which keeps the tree shape through a re-parse.
    let wrap = |e: &FilterExpr| match e {
        FilterExpr::Or(..) | FilterExpr::And(..) => format!("({})", filter(e)),
        _ => filter(e),
    };
    match f {
        FilterExpr::Or(a, b) => format!("{} || {}", wrap_left(a, true), wrap(b)),
        FilterExpr::And(a, b) => format!("{} && {}", wrap_left(a, false), wrap(b)),
        FilterExpr::Not(a) => format!("!{}", wrap_not(a)),
        FilterExpr::Cmp(op, l, r) => format!("{} {} {}", operand(l), op.symbol(), operand(r)),
        FilterExpr::TimeSemantic { fact, spec } => {
            let spec = match spec {
                TimeSpec::Interval(slots) => {
                    let s: Vec<String> = slots
                        .iter()
                        .map(|s| s.as_ref().map(time_expr).unwrap_or_else(|| "?".into()))
                        .collect();
                    format!("[{}]", s.join(", "))
                }
                TimeSpec::Keyword { keyword, args } => {
                    let mut s = keyword.name().to_owned();
                    for a in args {
                        let _ = write!(s, ", {}", time_expr(a));
                    }
                    s
                }
            };
            format!("timesemantic({}, {})", operand(fact), spec)
        }
    }
}

/// Left operands chain without parentheses when they use the same operator.
fn wrap_left(e: &FilterExpr, or: bool) -> String {
    match e {
        FilterExpr::Or(..) if or => filter(e),
        FilterExpr::And(..) if !or => filter(e),
        FilterExpr::Or(..) | FilterExpr::And(..) => format!("({})", filter(e)),
        _ => filter(e),
    }
}

fn wrap_not(e: &FilterExpr) -> String {
    match e {
        FilterExpr::Not(_) | FilterExpr::TimeSemantic { .. } => filter(e),
        _ => format!("({})", filter(e)),
    }
}

fn regex(r: &PathRegex) -> String {
    match r {
        PathRegex::Term(v) => format!("?{v}"),
        PathRegex::Seq(xs) => xs
            .iter()
            .map(|x| match x {
                PathRegex::Alt(_) => format!("({})", regex(x)),
                _ => regex(x),
            })
            .collect::<Vec<_>>()
            .join(" "),
        PathRegex::Alt(xs) => xs.iter().map(regex).collect::<Vec<_>>().join(" | "),
        PathRegex::Star(x) => format!("{}*", postfix_operand(x)),
        PathRegex::Plus(x) => format!("{}+", postfix_operand(x)),
        PathRegex::Opt(x) => format!("{}?", postfix_operand(x)),
    }
}

fn postfix_operand(x: &PathRegex) -> String {
    match x {
        PathRegex::Seq(_) | PathRegex::Alt(_) => format!("({})", regex(x)),
        _ => regex(x),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_query;
    use super::*;

    #[test]
    fn round_trips() {
        for q in [
            "select ?d where { ?e wasDerivedFrom ?doc . ?doc @id ?d . ?doc @timestamp ?ts \
             filter(timesemantic(?ts, [t3, ?, ?, t6])) }",
            "select all * where { ?x @id \"Analysis.doc\" filter(!(?x = 't3') || ?x != a && ?x > 3) }",
            "fconstruct \"my folder\" as ?f select ?e where { ?e @type analysis }",
            "pconstruct P (?s, ?e, ?s (?r ?x | ?q)+ ?e?) as ?p where { ?s @id A }",
            "(F, G) apply (select ?e where { ?e @timestamp ?ts filter(timesemantic(?ts, [t, ?, ?, t + d - 1])) })",
        ] {
            let ast = parse_query(q).unwrap();
            let printed = print_query(&ast);
            assert_eq!(parse_query(&printed).unwrap(), ast, "{printed}");
        }
    }

    #[test]
    fn time_like_text_is_quoted() {
        let ast = parse_query("select ?x where { ?x @id 't3' }").unwrap();
        assert!(print_query(&ast).contains("\"t3\""));
    }
}
