use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize, Spanned, Tok};
use super::QueryError;
use crate::model::Relation;

pub fn parse_query(src: &str) -> Result<Statement, QueryError> {
    let mut p = Parser::new(src)?;
    let stmt = p.statement()?;
    if p.peek() == &Tok::Semi {
        p.bump();
    }
    p.expect(Tok::Eof, "end of query")?;
    Ok(stmt)
}

/// Parse a standalone path expression such as `?a (?e ?b)*`.
pub fn parse_path_regex(src: &str) -> Result<PathRegex, QueryError> {
    let mut p = Parser::new(src)?;
    let (line, col) = p.pos();
    let regex = p.regex()?;
    p.expect(Tok::Eof, "end of path expression")?;
    check_nullable(&regex, line, col)?;
    Ok(regex)
}

fn check_nullable(regex: &PathRegex, line: usize, col: usize) -> Result<(), QueryError> {
    fn nullable(r: &PathRegex) -> bool {
        match r {
            PathRegex::Term(_) => false,
            PathRegex::Seq(xs) => xs.iter().all(nullable),
            PathRegex::Alt(xs) => xs.iter().any(nullable),
            PathRegex::Star(_) | PathRegex::Opt(_) => true,
            PathRegex::Plus(x) => nullable(x),
        }
    }
    if nullable(regex) {
        Err(QueryError::EmptyExpression { line, col })
    } else {
        Ok(())
    }
}

struct VarUse {
    name: String,
    line: usize,
    col: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, QueryError> {
        Ok(Parser {
            toks: tokenize(src)?,
            at: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.at + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn pos(&self) -> (usize, usize) {
        let t = &self.toks[self.at];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, QueryError> {
        let (line, col) = self.pos();
        Err(QueryError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn found(&self) -> String {
        match self.peek() {
            Tok::Eof => "end of input".into(),
            Tok::Var(v) => format!("`?{v}`"),
            Tok::Attr(a) => format!("`@{a}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Time(t) => format!("`t{t}`"),
            other => format!("{other:?}"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", self.found()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        let hit = self.is_keyword(kw);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.found()))
        }
    }

    fn var(&mut self) -> Result<VarUse, QueryError> {
        let (line, col) = self.pos();
        match self.peek().clone() {
            Tok::Var(name) => {
                self.bump();
                Ok(VarUse { name, line, col })
            }
            _ => self.error(format!("expected a variable, found {}", self.found())),
        }
    }

    fn name(&mut self) -> Result<String, QueryError> {
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected a name, found {}", self.found())),
        }
    }

    fn statement(&mut self) -> Result<Statement, QueryError> {
        if self.is_keyword("select") {
            Ok(Statement::Select(self.select()?))
        } else if self.eat_keyword("fconstruct") {
            Ok(Statement::Fconstruct(self.fconstruct()?))
        } else if self.eat_keyword("pconstruct") {
            Ok(Statement::Pconstruct(self.pconstruct()?))
        } else if self.peek() == &Tok::LParen {
            Ok(Statement::Apply(self.apply()?))
        } else {
            self.error(format!(
                "expected `select`, `fconstruct`, `pconstruct` or `(`, found {}",
                self.found()
            ))
        }
    }

    fn select(&mut self) -> Result<Select, QueryError> {
        self.expect_keyword("select")?;
        let distinct = if self.eat_keyword("distinct") {
            true
        } else {
            !self.eat_keyword("all")
        };
        let mut uses = Vec::new();
        let projection = if self.peek() == &Tok::Star {
            self.bump();
            Projection::All
        } else {
            while matches!(self.peek(), Tok::Var(_)) {
                uses.push(self.var()?);
            }
            if uses.is_empty() {
                return self.error(format!("expected `*` or variables, found {}", self.found()));
            }
            Projection::Vars(uses.iter().map(|u| u.name.clone()).collect())
        };
        self.expect_keyword("where")?;
        let body = self.group()?;
        check_bound(&body, &uses)?;
        Ok(Select {
            distinct,
            projection,
            body,
        })
    }

    fn fconstruct(&mut self) -> Result<Fconstruct, QueryError> {
        let name = self.name()?;
        self.expect_keyword("as")?;
        let var = self.var()?.name;
        let mut uses = Vec::new();
        let members = if self.eat_keyword("select") {
            if self.peek() == &Tok::LParen {
                self.bump();
                let mut names = vec![self.name()?];
                while self.peek() == &Tok::Comma {
                    self.bump();
                    names.push(self.name()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                Some(MemberSpec::Folders(names))
            } else {
                while matches!(self.peek(), Tok::Var(_)) {
                    uses.push(self.var()?);
                }
                if uses.is_empty() {
                    return self.error(format!("expected member variables, found {}", self.found()));
                }
                Some(MemberSpec::Vars(uses.iter().map(|u| u.name.clone()).collect()))
            }
        } else {
            None
        };
        self.expect_keyword("where")?;
        let body = self.group()?;
        check_bound(&body, &uses)?;
        Ok(Fconstruct {
            name,
            var,
            members,
            body,
        })
    }

    fn pconstruct(&mut self) -> Result<Pconstruct, QueryError> {
        let name = self.name()?;
        self.expect(Tok::LParen, "`(`")?;
        let start = self.endpoint()?;
        self.expect(Tok::Comma, "`,`")?;
        let end = self.endpoint()?;
        self.expect(Tok::Comma, "`,`")?;
        let (line, col) = self.pos();
        let regex = self.regex()?;
        check_nullable(&regex, line, col)?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect_keyword("as")?;
        let var = self.var()?.name;
        self.expect_keyword("where")?;
        let body = self.group()?;
        Ok(Pconstruct {
            name,
            var,
            start,
            end,
            regex,
            body,
        })
    }

    fn endpoint(&mut self) -> Result<Option<Term>, QueryError> {
        if self.peek() == &Tok::Comma {
            return Ok(None);
        }
        self.term().map(Some)
    }

    fn apply(&mut self) -> Result<Apply, QueryError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut scope = vec![self.name()?];
        while self.peek() == &Tok::Comma {
            self.bump();
            scope.push(self.name()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect_keyword("apply")?;
        self.expect(Tok::LParen, "`(`")?;
        let inner = self.select()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Apply { scope, inner })
    }

    fn group(&mut self) -> Result<GroupPattern, QueryError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut body = GroupPattern::default();
        let mut filter_uses = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Dot => {
                    self.bump();
                }
                _ if self.is_keyword("filter") && self.peek_at(1) == &Tok::LParen => {
                    self.bump();
                    self.bump();
                    body.filters.push(self.or_expr(&mut filter_uses)?);
                    self.expect(Tok::RParen, "`)` closing the filter")?;
                }
                _ => body.patterns.push(self.pattern()?),
            }
        }
        check_bound(&body, &filter_uses)?;
        Ok(body)
    }

    fn pattern(&mut self) -> Result<TriplePattern, QueryError> {
        let subject = self.term()?;
        let predicate = match self.peek().clone() {
            Tok::Attr(a) => Predicate::Attr(a),
            Tok::Ident(s) => match Relation::ALL
                .into_iter()
                .find(|r| r.name().eq_ignore_ascii_case(&s))
            {
                Some(r) => Predicate::Rel(r),
                None => return self.error(format!("unknown relation `{s}`")),
            },
            _ => return self.error(format!("expected `@attribute` or a relation, found {}", self.found())),
        };
        self.bump();
        let object = self.term()?;
        Ok(TriplePattern {
            subject,
            predicate,
            object,
        })
    }

    fn term(&mut self) -> Result<Term, QueryError> {
        let t = match self.peek().clone() {
            Tok::Var(v) => Term::Var(v),
            Tok::Str(s) | Tok::Ident(s) => Term::Const(Value::Text(s)),
            Tok::Num(n) => Term::Const(Value::Int(n)),
            Tok::Time(t) => Term::Const(Value::Time(t)),
            _ => return self.error(format!("expected a variable or a value, found {}", self.found())),
        };
        self.bump();
        Ok(t)
    }

    fn or_expr(&mut self, uses: &mut Vec<VarUse>) -> Result<FilterExpr, QueryError> {
        let mut lhs = self.and_expr(uses)?;
        while self.peek() == &Tok::OrOr {
            self.bump();
            let rhs = self.and_expr(uses)?;
            lhs = FilterExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self, uses: &mut Vec<VarUse>) -> Result<FilterExpr, QueryError> {
        let mut lhs = self.unary(uses)?;
        while self.peek() == &Tok::AndAnd {
            self.bump();
            let rhs = self.unary(uses)?;
            lhs = FilterExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self, uses: &mut Vec<VarUse>) -> Result<FilterExpr, QueryError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(FilterExpr::Not(Box::new(self.unary(uses)?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.or_expr(uses)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ if self.is_keyword("timesemantic") && self.peek_at(1) == &Tok::LParen => {
                self.bump();
                self.bump();
                self.time_semantic(uses)
            }
            _ => {
                let lhs = self.operand(uses)?;
                let op = match self.peek() {
                    Tok::Eq => CmpOp::Eq,
                    Tok::Ne => CmpOp::Ne,
                    Tok::Lt => CmpOp::Lt,
                    Tok::Le => CmpOp::Le,
                    Tok::Gt => CmpOp::Gt,
                    Tok::Ge => CmpOp::Ge,
                    _ => return self.error(format!("expected a comparison, found {}", self.found())),
                };
                self.bump();
                let rhs = self.operand(uses)?;
                Ok(FilterExpr::Cmp(op, lhs, rhs))
            }
        }
    }

    fn operand(&mut self, uses: &mut Vec<VarUse>) -> Result<Operand, QueryError> {
        match self.peek().clone() {
            Tok::Var(_) => {
                let u = self.var()?;
                let op = Operand::Var(u.name.clone());
                uses.push(u);
                Ok(op)
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Operand::Const(Value::Text(s)))
            }
            Tok::Ident(s) if !is_scope_word(&s) => {
                if matches!(self.peek_at(1), Tok::Plus | Tok::Minus) {
                    return self.error(format!("`{s}` cannot be used in time arithmetic"));
                }
                self.bump();
                Ok(Operand::Const(Value::Text(s)))
            }
            Tok::Num(_) | Tok::Time(_) | Tok::Ident(_) => {
                let first = self.peek().clone();
                let expr = self.time_expr()?;
                if let [(_, atom)] = expr.terms.as_slice() {
                    match (atom, first) {
                        (TimeAtom::Ticks(n), _) => return Ok(Operand::Const(Value::Int(*n))),
                        (TimeAtom::Instant(t), _) => return Ok(Operand::Const(Value::Time(*t))),
                        _ => {}
                    }
                }
                Ok(Operand::Time(expr))
            }
            _ => self.error(format!("expected an operand, found {}", self.found())),
        }
    }

    fn time_atom(&mut self) -> Result<TimeAtom, QueryError> {
        let atom = match self.peek() {
            Tok::Num(n) => TimeAtom::Ticks(*n),
            Tok::Time(t) => TimeAtom::Instant(*t),
            Tok::Ident(s) if s == "t" => TimeAtom::ScopeStart,
            Tok::Ident(s) if s == "d" => TimeAtom::ScopeDuration,
            _ => return self.error(format!("expected a time, found {}", self.found())),
        };
        self.bump();
        Ok(atom)
    }

    fn time_expr(&mut self) -> Result<TimeExpr, QueryError> {
        let mut terms = vec![(Sign::Plus, self.time_atom()?)];
        loop {
            let sign = match self.peek() {
                Tok::Plus => Sign::Plus,
                Tok::Minus => Sign::Minus,
                _ => break,
            };
            self.bump();
            terms.push((sign, self.time_atom()?));
        }
        Ok(TimeExpr { terms })
    }

    fn time_semantic(&mut self, uses: &mut Vec<VarUse>) -> Result<FilterExpr, QueryError> {
        let fact = self.operand(uses)?;
        self.expect(Tok::Comma, "`,`")?;
        let (line, col) = self.pos();
        let spec = if self.peek() == &Tok::LBracket {
            self.bump();
            let mut slots = Vec::new();
            if self.peek() != &Tok::RBracket {
                loop {
                    if self.peek() == &Tok::Question {
                        self.bump();
                        slots.push(None);
                    } else {
                        slots.push(Some(self.time_expr()?));
                    }
                    if self.peek() != &Tok::Comma {
                        break;
                    }
                    self.bump();
                }
            }
            self.expect(Tok::RBracket, "`]`")?;
            let found = slots.len();
            let slots: [Option<TimeExpr>; 4] = slots.try_into().map_err(|_| QueryError::Arity {
                expected: 4,
                found,
                line,
                col,
            })?;
            TimeSpec::Interval(slots)
        } else {
            let Tok::Ident(word) = self.peek().clone() else {
                return self.error(format!("expected `[` or a time keyword, found {}", self.found()));
            };
            let keyword = TimeKeyword::from_name(&word).ok_or(QueryError::UnknownKeyword {
                keyword: word,
                line,
                col,
            })?;
            self.bump();
            let mut args = Vec::new();
            while self.peek() != &Tok::RParen {
                if self.peek() == &Tok::Comma {
                    self.bump();
                }
                args.push(self.time_expr()?);
            }
            if args.len() != keyword.arity() {
                return Err(QueryError::Arity {
                    expected: keyword.arity(),
                    found: args.len(),
                    line,
                    col,
                });
            }
            TimeSpec::Keyword { keyword, args }
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(FilterExpr::TimeSemantic { fact, spec })
    }

    fn regex(&mut self) -> Result<PathRegex, QueryError> {
        let mut alts = vec![self.regex_seq()?];
        while self.peek() == &Tok::Pipe {
            self.bump();
            alts.push(self.regex_seq()?);
        }
        Ok(PathRegex::alt(alts))
    }

    fn regex_seq(&mut self) -> Result<PathRegex, QueryError> {
        let mut items = Vec::new();
        while matches!(self.peek(), Tok::Var(_) | Tok::LParen) {
            let mut atom = if self.peek() == &Tok::LParen {
                self.bump();
                let inner = self.regex()?;
                self.expect(Tok::RParen, "`)`")?;
                inner
            } else {
                PathRegex::Term(self.var()?.name)
            };
            loop {
                atom = match self.peek() {
                    Tok::Star => PathRegex::Star(Box::new(atom)),
                    Tok::Plus => PathRegex::Plus(Box::new(atom)),
                    Tok::Question => PathRegex::Opt(Box::new(atom)),
                    _ => break,
                };
                self.bump();
            }
            items.push(atom);
        }
        if items.is_empty() {
            let (line, col) = self.pos();
            return match self.peek() {
                Tok::RParen | Tok::Pipe => Err(QueryError::EmptyExpression { line, col }),
                _ => self.error(format!("expected a path term, found {}", self.found())),
            };
        }
        Ok(PathRegex::seq(items))
    }
}

fn is_scope_word(s: &str) -> bool {
    s == "t" || s == "d"
}

fn check_bound(body: &GroupPattern, uses: &[VarUse]) -> Result<(), QueryError> {
    let bound: BTreeSet<&str> = body.pattern_vars();
    match uses.iter().find(|u| !bound.contains(u.name.as_str())) {
        Some(u) => Err(QueryError::UnboundVariable {
            name: u.name.clone(),
            line: u.line,
            col: u.col,
        }),
        None => Ok(()),
    }
}
