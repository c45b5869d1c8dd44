use std::fmt::Write as _;

use thiserror::Error;

use super::{is_opm_relation, OpmEdge, OpmGraph, OpmKind, OpmNode};
use crate::lineformat::{self, Token};
use crate::model::{Relation, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpmParseError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("line {line}, column {col}: unknown relation `{name}`")]
    UnknownRelation { line: usize, col: usize, name: String },
    #[error("line {line}, column {col}: unknown node kind `{name}`")]
    UnknownKind { line: usize, col: usize, name: String },
}

impl OpmParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            OpmParseError::Syntax { line, col, .. }
            | OpmParseError::UnknownRelation { line, col, .. }
            | OpmParseError::UnknownKind { line, col, .. } => (*line, *col),
        }
    }
}

pub fn parse_opm_bytes(source: &[u8]) -> Result<OpmGraph, OpmParseError> {
    match std::str::from_utf8(source) {
        Ok(text) => parse_opm(text),
        Err(e) => {
            let good = &source[..e.valid_up_to()];
            let line = good.iter().filter(|b| **b == b'\n').count() + 1;
            let col = good.iter().rev().take_while(|b| **b != b'\n').count() + 1;
            Err(OpmParseError::Syntax {
                line,
                col,
                message: "invalid UTF-8".into(),
            })
        }
    }
}

pub fn parse_opm(source: &str) -> Result<OpmGraph, OpmParseError> {
    let mut graph = OpmGraph::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let syntax = |col: usize, message: String| OpmParseError::Syntax { line, col, message };
        let tokens = lineformat::tokenize(raw).map_err(|e| syntax(e.col, e.message))?;
        let Some(head) = tokens.first() else { continue };
        match head.text.as_str() {
            "node" => {
                let [id, kind] = positional::<2>(&tokens, line)?;
                let k = OpmKind::from_token(&kind.text).ok_or_else(|| OpmParseError::UnknownKind {
                    line,
                    col: kind.col,
                    name: kind.text.clone(),
                })?;
                let mut node = OpmNode::new(id.text.clone(), k);
                for tok in &tokens[3..] {
                    let (key, value) = attribute(tok, line)?;
                    node.attributes.insert(key.to_owned(), value.to_owned());
                }
                if !graph.add_node(node) {
                    return Err(syntax(id.col, format!("duplicate node id `{}`", id.text)));
                }
            }
            "edge" => {
                let [from, rel, to] = positional::<3>(&tokens, line)?;
                let relation = Relation::from_name(&rel.text)
                    .filter(|r| is_opm_relation(*r))
                    .ok_or_else(|| OpmParseError::UnknownRelation {
                        line,
                        col: rel.col,
                        name: rel.text.clone(),
                    })?;
                let mut edge = OpmEdge::new(from.text.clone(), relation, to.text.clone());
                for tok in &tokens[4..] {
                    let (key, value) = attribute(tok, line)?;
                    let time = || {
                        value
                            .parse::<Timestamp>()
                            .map_err(|m| syntax(tok.col + key.len() + 1, m))
                    };
                    match key {
                        "t" => edge.time = Some(time()?),
                        "src_t" => edge.source_time = Some(time()?),
                        _ => {
                            edge.attributes.insert(key.to_owned(), value.to_owned());
                        }
                    }
                }
                graph.add_edge(edge);
            }
            other => {
                return Err(syntax(
                    head.col,
                    format!("expected `node` or `edge`, found `{other}`"),
                ))
            }
        }
    }
    Ok(graph)
}

fn positional<const N: usize>(tokens: &[Token], line: usize) -> Result<[&Token; N], OpmParseError> {
    let head = &tokens[0];
    let mut out = Vec::with_capacity(N);
    for i in 0..N {
        match tokens.get(i + 1) {
            Some(tok) if tok.eq.is_none() => out.push(tok),
            Some(tok) => {
                return Err(OpmParseError::Syntax {
                    line,
                    col: tok.col,
                    message: format!("expected {N} positional fields after `{}`", head.text),
                })
            }
            None => {
                return Err(OpmParseError::Syntax {
                    line,
                    col: head.col,
                    message: format!("`{}` needs {N} positional fields", head.text),
                })
            }
        }
    }
    Ok(out.try_into().expect("exactly N tokens collected"))
}

fn attribute(tok: &Token, line: usize) -> Result<(&str, &str), OpmParseError> {
    match tok.key_value() {
        Some((k, v)) if !k.is_empty() => Ok((k, v)),
        _ => Err(OpmParseError::Syntax {
            line,
            col: tok.col,
            message: format!("expected key=value, found `{}`", tok.text),
        }),
    }
}

/// Writes nodes, then edges, in stored order.
pub fn serialize_opm(graph: &OpmGraph) -> String {
    let mut out = String::new();
    for n in &graph.nodes {
        let _ = write!(out, "node {} {}", lineformat::quote(&n.id), n.kind);
        for (k, v) in &n.attributes {
            let _ = write!(out, " {}", lineformat::key_value(k, v));
        }
        out.push('\n');
    }
    for e in &graph.edges {
        let _ = write!(
            out,
            "edge {} {} {}",
            lineformat::quote(&e.from),
            e.relation,
            lineformat::quote(&e.to)
        );
        if let Some(t) = e.time {
            let _ = write!(out, " t={}", t.0);
        }
        if let Some(t) = e.source_time {
            let _ = write!(out, " src_t={}", t.0);
        }
        for (k, v) in &e.attributes {
            let _ = write!(out, " {}", lineformat::key_value(k, v));
        }
        out.push('\n');
    }
    out
}
