//! Line-oriented interactive shell. Statements may span lines; one runs
//! once its brackets balance and it ends in `}`, `)` or `;`. Backslash commands:
//!
//! * `\list` lists materialized nodes,
//! * `\evolution <name> <t>` shows a node's content at time `t`,
//! * `\tick <t>` advances the clock and runs due agents,
//! * `\help`, `\quit`.

use std::io::{BufRead, IsTerminal, Write};
use std::path::Path;

use tpm::engine::EngineOptions;
use tpm::{Engine, NodeKind};

use crate::commands::{parse_time, run_statement, tick_engine, Format};
use crate::error::{CliError, Result};
use crate::workspace::Workspace;

const HELP: &str = "\\list                 materialized folder and path nodes
\\evolution <name> <t>  content of a folder or path node at time t
\\tick <t>             advance the clock to t and run due agents
\\quit                 leave
";

fn balanced(text: &str) -> bool {
    let mut depth = 0i64;
    let mut quote: Option<char> = None;
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match (quote, c) {
            (Some(_), '\\') => {
                chars.next();
            }
            (Some('`'), '\'') | (Some('`'), '`') => quote = None,
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"' | '`') => quote = Some(c),
            (None, '#') => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            (None, '{' | '(' | '[') => depth += 1,
            (None, '}' | ')' | ']') => depth -= 1,
            _ => {}
        }
    }
    depth <= 0 && quote.is_none()
}

struct Session<'a> {
    ws: Workspace,
    engine: Engine,
    out: &'a mut dyn Write,
}

impl Session<'_> {
    fn say(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| CliError::io("output", e))
    }

    fn command(&mut self, line: &str) -> Result<bool> {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["\\quit" | "\\q"] => return Ok(false),
            ["\\help" | "\\h"] => self.say(HELP)?,
            ["\\list"] => {
                let mut text = String::new();
                for m in self.engine.catalog() {
                    text.push_str(&m.summary());
                    text.push('\n');
                }
                if text.is_empty() {
                    text.push_str("no materialized nodes\n");
                }
                self.say(&text)?;
            }
            ["\\evolution", name, t] => {
                let t = parse_time(t)?;
                let m = self
                    .engine
                    .materialized(name)
                    .ok_or_else(|| CliError::query(format!("unknown folder or path node `{name}`")))?;
                let mut text = String::new();
                if m.kind == NodeKind::PathNode {
                    for (i, p) in self.engine.truncated_paths_at(name, t)?.iter().enumerate() {
                        text.push_str(&format!("path:{}\t{}\n", i + 1, p.join("\t")));
                    }
                } else {
                    for id in self.engine.evolution_at(name, t)? {
                        text.push_str(&id);
                        text.push('\n');
                    }
                }
                self.say(&text)?;
            }
            ["\\tick", t] => {
                let t = parse_time(t)?;
                let text = tick_engine(&mut self.ws, &mut self.engine, t)?;
                self.ws.store_engine(&self.engine)?;
                self.say(&text)?;
            }
            _ => return Err(CliError::query(format!("unknown command `{line}`; try \\help"))),
        }
        Ok(true)
    }

    fn statement(&mut self, text: &str) -> Result<()> {
        let now = self.ws.clock();
        let result = run_statement(&mut self.engine, text, now, Format::Tsv)?;
        if tpm::query::parse_query(text).is_ok_and(|s| s.defines().is_some()) {
            self.ws.store_engine(&self.engine)?;
        }
        self.say(&result)
    }
}

/// Run the shell over `input` until end of input or `\quit`. Errors in
/// single statements are reported and the session continues.
pub fn run(dir: &Path, max_path_len: Option<usize>, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let ws = Workspace::open(dir)?;
    let mut engine = ws.engine()?;
    let mut options = EngineOptions::default();
    options.path.max_path_len = max_path_len;
    engine.options = options;
    let interactive = std::io::stdin().is_terminal();
    let mut s = Session { ws, engine, out };
    let mut buffer = String::new();
    loop {
        if interactive {
            eprint!("{}", if buffer.is_empty() { "tpm> " } else { "...> " });
        }
        let mut line = String::new();
        let n = input.read_line(&mut line).map_err(|e| CliError::io("input", e))?;
        if n == 0 {
            break;
        }
        if buffer.is_empty() && line.trim_start().starts_with('\\') {
            match s.command(line.trim()) {
                Ok(true) => {}
                Ok(false) => break,
                Err(e) => eprintln!("error: {e}"),
            }
            continue;
        }
        buffer.push_str(&line);
        if buffer.trim().is_empty() {
            buffer.clear();
            continue;
        }
        if balanced(&buffer) && buffer.trim_end().ends_with(['}', ')', ';']) {
            let text = std::mem::take(&mut buffer);
            if let Err(e) = s.statement(text.trim().trim_end_matches(';')) {
                eprintln!("error: {e}");
            }
        }
    }
    if !buffer.trim().is_empty() {
        eprintln!("error: incomplete statement at end of input");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::balanced;

    #[test]
    fn bracket_balance_ignores_strings() {
        assert!(!balanced("select * where {"));
        assert!(balanced("select * where { ?a @id `x}' }"));
        assert!(!balanced("select * where { ?a @id \"}\""));
        assert!(balanced("select * where { # }\n }"));
    }
}
