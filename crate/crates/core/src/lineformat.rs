//! Tokenizer and quoting shared by the OPM and native TPM text formats.
//!
//! A line is a sequence of whitespace-separated tokens. Double quotes group
//! text containing spaces, `#` or `=`; inside quotes `\"` and `\\` escape.
//! An unquoted `#` at the start of a token begins a comment.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// 1-based column of the token's first byte.
    pub col: usize,
    /// Byte offset (into `text`) of the first unquoted `=`.
    pub eq: Option<usize>,
}

impl Token {
    /// Splits a `key=value` token. Returns `None` for a plain token.
    pub fn key_value(&self) -> Option<(&str, &str)> {
        self.eq.map(|i| (&self.text[..i], &self.text[i + 1..]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub col: usize,
    pub message: String,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.col, self.message)
    }
}

pub fn tokenize(line: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '#' {
            break;
        }
        let mut text = String::new();
        let mut eq = None;
        while let Some(&(pos, c)) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.next();
            match c {
                '"' => loop {
                    match chars.next() {
                        None => {
                            return Err(LexError {
                                col: pos + 1,
                                message: "unterminated quoted string".into(),
                            })
                        }
                        Some((_, '"')) => break,
                        Some((esc_pos, '\\')) => match chars.next() {
                            Some((_, e @ ('"' | '\\'))) => text.push(e),
                            Some((_, 'n')) => text.push('\n'),
                            Some((_, 't')) => text.push('\t'),
                            _ => {
                                return Err(LexError {
                                    col: esc_pos + 1,
                                    message: "invalid escape in quoted string".into(),
                                })
                            }
                        },
                        Some((_, other)) => text.push(other),
                    }
                },
                '=' if eq.is_none() => {
                    eq = Some(text.len());
                    text.push('=');
                }
                other => text.push(other),
            }
        }
        tokens.push(Token {
            text,
            col: start + 1,
            eq,
        });
    }
    Ok(tokens)
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.starts_with('#')
        || s.chars()
            .any(|c| c.is_whitespace() || matches!(c, '"' | '\\' | '='))
}

/// Renders `s` so that [`tokenize`] reads it back as one plain token.
pub fn quote(s: &str) -> String {
    if !needs_quotes(s) {
        return s.to_owned();
    }
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

pub fn key_value(key: &str, value: &str) -> String {
    format!("{}={}", quote(key), quote(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_tracks_columns() {
        let toks = tokenize("edge  a used b t=3 # trailing").unwrap();
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["edge", "a", "used", "b", "t=3"]);
        assert_eq!(toks[1].col, 7);
        assert_eq!(toks[4].key_value(), Some(("t", "3")));
        assert_eq!(toks[2].key_value(), None);
    }

    #[test]
    fn quoted_values() {
        let toks = tokenize(r#"node "my file" artifact note="a = b \"x\"""#).unwrap();
        assert_eq!(toks[1].text, "my file");
        assert_eq!(toks[1].eq, None);
        assert_eq!(toks[3].key_value(), Some(("note", r#"a = b "x""#)));
    }

    #[test]
    fn quote_round_trips() {
        for s in ["plain", "with space", "#hash", "a=b", "q\"uote", "", "back\\slash", "tab\there"] {
            let line = format!("{} {}", quote(s), key_value("k", s));
            let toks = tokenize(&line).unwrap();
            assert_eq!(toks[0].text, s);
            assert_eq!(toks[0].eq, None);
            assert_eq!(toks[1].key_value(), Some(("k", s)));
        }
    }

    #[test]
    fn unterminated_quote_reports_column() {
        let err = tokenize("node \"abc").unwrap_err();
        assert_eq!(err.col, 6);
    }
}
