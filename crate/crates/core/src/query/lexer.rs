use super::QueryError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Var(String),
    /// `@name`, lower-cased.
    Attr(String),
    Ident(String),
    Str(String),
    Num(u64),
    /// `t<digits>`
    Time(u64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Semi,
    Star,
    Plus,
    Minus,
    Pipe,
    OrOr,
    AndAnd,
    Bang,
    Question,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | ':')
}

fn is_var_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Length of the identifier starting at `start`. A `-` ends the word when
/// what precedes it is `t`, `d` or an instant literal, so `t6-2` and `t-d`
/// read as arithmetic.
pub fn ident_len(chars: &[char], start: usize) -> usize {
    let mut end = start;
    while let Some(&c) = chars.get(end) {
        if !is_ident_char(c) {
            break;
        }
        if c == '-' {
            let word: String = chars[start..end].iter().collect();
            if word == "t" || word == "d" || time_literal(&word).is_some() {
                break;
            }
        }
        end += 1;
    }
    end - start
}

/// `t12` style instant literal.
pub fn time_literal(word: &str) -> Option<u64> {
    let digits = word.strip_prefix('t')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, QueryError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let syntax = |line, col, message: String| QueryError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let push = |tok: Tok, out: &mut Vec<Spanned>| out.push(Spanned { tok, line: tl, col: tc });
        let take_word = |start: usize, pred: fn(char) -> bool| {
            let mut j = start;
            while j < chars.len() && pred(chars[j]) {
                j += 1;
            }
            (chars[start..j].iter().collect::<String>(), j - start)
        };
        match c {
            '?' if next.is_some_and(is_var_char) => {
                let (name, n) = take_word(i + 1, is_var_char);
                push(Tok::Var(name), &mut out);
                advance(n + 1, &mut i, &mut col);
            }
            '@' => {
                if !next.is_some_and(is_ident_start) {
                    return Err(syntax(tl, tc, "expected an attribute name after `@`".into()));
                }
                let (name, n) = take_word(i + 1, is_ident_char);
                push(Tok::Attr(name.to_ascii_lowercase()), &mut out);
                advance(n + 1, &mut i, &mut col);
            }
            '\'' | '"' | '`' => {
                let mut text = String::new();
                let mut j = i + 1;
                let (mut l, mut cc) = (line, col + 1);
                loop {
                    let Some(&ch) = chars.get(j) else {
                        return Err(syntax(tl, tc, "unterminated string literal".into()));
                    };
                    let closes = match c {
                        '`' => ch == '\'' || ch == '`',
                        q => ch == q,
                    };
                    if closes {
                        j += 1;
                        cc += 1;
                        break;
                    }
                    if ch == '\\' {
                        match chars.get(j + 1) {
                            Some(&e @ ('\\' | '\'' | '"' | '`')) => text.push(e),
                            Some('n') => text.push('\n'),
                            Some('t') => text.push('\t'),
                            _ => return Err(syntax(l, cc, "invalid escape".into())),
                        }
                        j += 2;
                        cc += 2;
                        continue;
                    }
                    if ch == '\n' {
                        l += 1;
                        cc = 1;
                    } else {
                        cc += 1;
                    }
                    text.push(ch);
                    j += 1;
                }
                push(Tok::Str(text), &mut out);
                i = j;
                line = l;
                col = cc;
            }
            c if c.is_ascii_digit() => {
                let (digits, n) = take_word(i, |c| c.is_ascii_digit());
                if chars.get(i + n).is_some_and(|c| is_ident_start(*c)) {
                    return Err(syntax(tl, tc, "identifiers cannot start with a digit".into()));
                }
                let v = digits
                    .parse()
                    .map_err(|_| syntax(tl, tc, format!("number `{digits}` out of range")))?;
                push(Tok::Num(v), &mut out);
                advance(n, &mut i, &mut col);
            }
            c if is_ident_start(c) => {
                let n = ident_len(&chars, i);
                let word: String = chars[i..i + n].iter().collect();
                let tok = match time_literal(&word) {
                    Some(t) => Tok::Time(t),
                    None => Tok::Ident(word),
                };
                push(tok, &mut out);
                advance(n, &mut i, &mut col);
            }
            _ => {
                let two = next.map(|n| [c, n]);
                let (tok, n) = match two {
                    Some(['|', '|']) => (Tok::OrOr, 2),
                    Some(['&', '&']) => (Tok::AndAnd, 2),
                    Some(['!', '=']) => (Tok::Ne, 2),
                    Some(['<', '=']) => (Tok::Le, 2),
                    Some(['>', '=']) => (Tok::Ge, 2),
                    _ => {
                        let t = match c {
                            '{' => Tok::LBrace,
                            '}' => Tok::RBrace,
                            '(' => Tok::LParen,
                            ')' => Tok::RParen,
                            '[' => Tok::LBracket,
                            ']' => Tok::RBracket,
                            ',' => Tok::Comma,
                            '.' => Tok::Dot,
                            ';' => Tok::Semi,
                            '*' => Tok::Star,
                            '+' => Tok::Plus,
                            '-' => Tok::Minus,
                            '|' => Tok::Pipe,
                            '!' => Tok::Bang,
                            '?' => Tok::Question,
                            '=' => Tok::Eq,
                            '<' => Tok::Lt,
                            '>' => Tok::Gt,
                            other => {
                                return Err(syntax(tl, tc, format!("unexpected character `{other}`")))
                            }
                        };
                        (t, 1)
                    }
                };
                push(tok, &mut out);
                advance(n, &mut i, &mut col);
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
