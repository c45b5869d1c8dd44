//! Native TPM text format.
//!
//! ```text
//! node <id> <event|artifact|agent> <entity> <t> [key=value ...]
//! node <id> <folder|path> <entity> <start> <duration> [timed] [key=value ...]
//! edge <from> <relation> <to> [<weight>]
//! ```
//!
//! Quoting and comments follow the OPM format. Loading re-applies every
//! graph rule, so a hand-edited file cannot smuggle in an illegal edge.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{GraphError, TpmGraph};
use crate::lineformat::{self, Token};
use crate::model::{EdgeRecord, NodeKind, NodeRecord, Relation, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NativeError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
}

impl NativeError {
    pub fn line(&self) -> usize {
        match self {
            NativeError::Syntax { line, .. } | NativeError::Graph { line, .. } => *line,
        }
    }
}

pub fn parse_tpm(source: &str) -> Result<TpmGraph, NativeError> {
    let mut graph = TpmGraph::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let syntax = |col: usize, message: String| NativeError::Syntax { line, col, message };
        let tokens = lineformat::tokenize(raw).map_err(|e| syntax(e.col, e.message))?;
        let Some(head) = tokens.first() else { continue };
        let (plain, attrs): (Vec<&Token>, Vec<&Token>) = tokens[1..].iter().partition(|t| t.eq.is_none());
        let field = |k: usize, what: &str| {
            plain
                .get(k)
                .copied()
                .ok_or_else(|| syntax(head.col, format!("missing {what}")))
        };
        let number = |tok: &Token| {
            tok.text
                .parse::<Timestamp>()
                .map_err(|m| syntax(tok.col, m))
        };
        match head.text.as_str() {
            "node" => {
                let id = field(0, "node id")?;
                let kind_tok = field(1, "node kind")?;
                let kind = NodeKind::from_token(&kind_tok.text)
                    .ok_or_else(|| syntax(kind_tok.col, format!("unknown node kind `{}`", kind_tok.text)))?;
                let entity = field(2, "entity id")?;
                let mut node = if kind.is_container() {
                    let start = number(field(3, "start")?)?;
                    let duration = number(field(4, "duration")?)?;
                    let mut n = NodeRecord::container(kind, entity.text.as_str(), start, duration.0);
                    match plain.get(5) {
                        Some(t) if t.text == "timed" => n.timed = true,
                        Some(t) => return Err(syntax(t.col, format!("unexpected `{}`", t.text))),
                        None => {}
                    }
                    if let Some(t) = plain.get(6) {
                        return Err(syntax(t.col, format!("unexpected `{}`", t.text)));
                    }
                    n
                } else {
                    let at = number(field(3, "timestamp")?)?;
                    if let Some(t) = plain.get(4) {
                        return Err(syntax(t.col, format!("unexpected `{}`", t.text)));
                    }
                    let mut n = NodeRecord::event(entity.text.as_str(), at);
                    n.kind = kind;
                    n
                };
                node.id = id.text.clone();
                for a in attrs {
                    let (k, v) = a.key_value().expect("partitioned on `=`");
                    node.attributes.insert(k.to_owned(), v.to_owned());
                }
                graph
                    .add_node(node)
                    .map_err(|source| NativeError::Graph { line, source })?;
            }
            "edge" => {
                if let Some(a) = attrs.first() {
                    return Err(syntax(a.col, "edges take no attributes".into()));
                }
                let from = field(0, "source")?;
                let rel = field(1, "relation")?;
                let to = field(2, "target")?;
                let relation = Relation::from_name(&rel.text)
                    .ok_or_else(|| syntax(rel.col, format!("unknown relation `{}`", rel.text)))?;
                let mut edge = EdgeRecord::new(from.text.as_str(), relation, to.text.as_str());
                if let Some(w) = plain.get(3) {
                    edge.weight = Some(number(w)?.0);
                }
                if let Some(t) = plain.get(4) {
                    return Err(syntax(t.col, format!("unexpected `{}`", t.text)));
                }
                graph
                    .add_edge(edge)
                    .map_err(|source| NativeError::Graph { line, source })?;
            }
            other => {
                return Err(syntax(head.col, format!("expected `node` or `edge`, found `{other}`")))
            }
        }
    }
    Ok(graph)
}

pub fn serialize_tpm(graph: &TpmGraph) -> String {
    let mut out = String::new();
    for (_, n) in graph.nodes() {
        let _ = write!(
            out,
            "node {} {} {}",
            lineformat::quote(&n.id),
            n.kind,
            lineformat::quote(n.entity.as_str())
        );
        if n.kind.is_container() {
            let (s, _) = n.span();
            let _ = write!(out, " {} {}", s.0, n.duration.unwrap_or(0));
            if n.timed {
                out.push_str(" timed");
            }
        } else {
            let _ = write!(out, " {}", n.time().0);
        }
        for (k, v) in &n.attributes {
            let _ = write!(out, " {}", lineformat::key_value(k, v));
        }
        out.push('\n');
    }
    for (_, e) in graph.edges() {
        let _ = write!(
            out,
            "edge {} {} {}",
            lineformat::quote(&e.from),
            e.relation,
            lineformat::quote(&e.to)
        );
        if let Some(w) = e.weight {
            let _ = write!(out, " {w}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
node A@1 artifact A 1 owner=\"Paul K\"
node A@3 artifact A 3
node E@3 event E 3
node f folder phase 1 2 timed type=process
edge A@1 happenedBefore A@3 2
edge E@3 used A@3
edge E@3 isPartOf f
";

    #[test]
    fn parses_and_serializes_verbatim() {
        let g = parse_tpm(SAMPLE).unwrap();
        assert_eq!(g.node_count(), 4);
        assert!(g.node_by_id("f").unwrap().timed);
        assert_eq!(serialize_tpm(&g), SAMPLE);
    }

    #[test]
    fn rule_violations_carry_line() {
        let err = parse_tpm("node a artifact A 3\nnode b artifact A 1\nedge a happenedBefore b\n").unwrap_err();
        assert!(matches!(err, NativeError::Graph { line: 3, source: GraphError::TemporalViolation(_) }));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_tpm("node a blob A 3"), Err(NativeError::Syntax { col: 8, .. })));
        assert!(matches!(parse_tpm("node a event A"), Err(NativeError::Syntax { .. })));
        assert!(matches!(parse_tpm("node f folder F 1 2 hourly"), Err(NativeError::Syntax { .. })));
        assert!(matches!(parse_tpm("edge a likes b"), Err(NativeError::Syntax { .. })));
    }
}
