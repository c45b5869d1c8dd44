//! The folder/path query language: `select`, `fconstruct`, `pconstruct`
//! and `apply` statements over a TPM graph.

pub mod ast;
pub mod lexer;
mod parser;
mod print;
pub mod time;

use thiserror::Error;

pub use ast::*;
pub use parser::{parse_path_regex, parse_query};
pub use print::print_query;
pub use time::{resolve_time_keyword, span_filter, time_filter, Interval, SlotTemplate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unbound variable ?{name} at {line}:{col}")]
    UnboundVariable { name: String, line: usize, col: usize },
    #[error("time interval at {line}:{col} has {found} slots, expected {expected}")]
    Arity {
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
    #[error("empty path expression at {line}:{col}")]
    EmptyExpression { line: usize, col: usize },
    #[error("unknown time keyword `{keyword}` at {line}:{col}")]
    UnknownKeyword { keyword: String, line: usize, col: usize },
}

impl QueryError {
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            QueryError::Syntax { line, col, .. }
            | QueryError::UnboundVariable { line, col, .. }
            | QueryError::Arity { line, col, .. }
            | QueryError::EmptyExpression { line, col }
            | QueryError::UnknownKeyword { line, col, .. } => Some((*line, *col)),
        }
    }
}
