//! Splitting a query file into statements at top-level `;`.

use tpm::query::lexer::{tokenize, Tok};
use tpm::query::QueryError;

/// Statement texts of `src`, in order. Empty statements are dropped.
pub fn split_statements(src: &str) -> Result<Vec<String>, QueryError> {
    let tokens = tokenize(src)?;
    let line_starts: Vec<usize> = std::iter::once(0)
        .chain(src.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    let offset = |line: usize, col: usize| {
        let start = line_starts[line - 1];
        src[start..]
            .char_indices()
            .nth(col - 1)
            .map_or(src.len(), |(i, _)| start + i)
    };
    let mut out = Vec::new();
    let mut depth = 0i64;
    let mut from = 0;
    for t in &tokens {
        match t.tok {
            Tok::LBrace | Tok::LParen | Tok::LBracket => depth += 1,
            Tok::RBrace | Tok::RParen | Tok::RBracket => depth -= 1,
            Tok::Semi if depth == 0 => {
                let at = offset(t.line, t.col);
                out.push(src[from..at].to_owned());
                from = at + 1;
            }
            _ => {}
        }
    }
    out.push(src[from..].to_owned());
    out.retain(|s| tokenize(s).is_ok_and(|t| t.len() > 1));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_at_top_level_only() {
        let src = "select * where { ?a @id 'x;y' . } ;\n# comment; here\nselect ?b where { ?b @isA entityNode } ;";
        let parts = split_statements(src).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(parts[0].contains("'x;y'"));
        assert!(parts[1].trim_start().starts_with("# comment"));
    }
}
