//! The subcommands. Each writes its normal output to `out` and warnings to
//! standard error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use tpm::convert::{convert as convert_opm, ConversionError};
use tpm::engine::EngineOptions;
use tpm::native::{parse_tpm, serialize_tpm, NativeError};
use tpm::opm::{parse_opm_bytes, serialize_opm, validate_opm};
use tpm::query::parse_query;
use tpm::{Engine, NodeKind, Outcome, Timestamp, TpmGraph};

use crate::dot::{graph_to_dot, materialized_to_dot};
use crate::error::{CliError, Result};
use crate::script::split_statements;
use crate::workspace::{Workspace, AGENTS, CATALOG, GRAPH, LOG, SOURCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Tsv,
    Dot,
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("output", e))
}

/// `t5` or `5`.
pub fn parse_time(s: &str) -> Result<Timestamp> {
    s.strip_prefix('t')
        .unwrap_or(s)
        .parse()
        .map(Timestamp)
        .map_err(|_| CliError::parse(format!("`{s}` is not a time; write `t5` or `5`")))
}

/// Node counts by kind, e.g. `10 artifact instances, 6 events`.
pub fn graph_summary(g: &TpmGraph) -> String {
    let mut counts: BTreeMap<NodeKind, usize> = BTreeMap::new();
    for (_, n) in g.nodes() {
        *counts.entry(n.kind).or_default() += 1;
    }
    let name = |k: NodeKind| match k {
        NodeKind::Event => "events",
        NodeKind::ArtifactInstance => "artifact instances",
        NodeKind::AgentInstance => "agent instances",
        NodeKind::FolderNode => "folder nodes",
        NodeKind::PathNode => "path nodes",
    };
    let mut parts: Vec<String> = NodeKind::ALL
        .into_iter()
        .map(|k| format!("{} {}", counts.get(&k).copied().unwrap_or(0), name(k)))
        .collect();
    parts.push(format!("{} edges", g.edges().count()));
    parts.join(", ")
}

fn reset_derived(ws: &mut Workspace) -> Result<()> {
    for f in [GRAPH, CATALOG, AGENTS, LOG] {
        ws.remove(f)?;
    }
    Ok(())
}

pub fn load(dir: &Path, file: &Path, out: &mut dyn Write) -> Result<()> {
    let mut ws = Workspace::open(dir)?;
    let bytes = fs::read(file).map_err(|e| CliError::io(file.display(), e))?;
    if file.extension().is_some_and(|x| x == "tpm") {
        let text = String::from_utf8(bytes).map_err(|e| CliError::parse(format!("{}: {e}", file.display())))?;
        let graph = parse_tpm(&text).map_err(|e| match e {
            NativeError::Graph { .. } => CliError::validation(format!("{}: {e}", file.display())),
            NativeError::Syntax { .. } => CliError::parse(format!("{}: {e}", file.display())),
        })?;
        let stored = serialize_tpm(&graph);
        if ws.read(GRAPH)?.as_deref() != Some(stored.as_str()) || ws.has(SOURCE) {
            reset_derived(&mut ws)?;
            ws.remove(SOURCE)?;
            ws.write(GRAPH, &stored)?;
            ws.manifest.clock = graph.max_time().map_or(0, |t| t.0);
            ws.save()?;
        }
        return emit(out, &format!("{}\n", graph_summary(&graph)));
    }

    let opm = parse_opm_bytes(&bytes).map_err(|e| CliError::parse(format!("{}: {e}", file.display())))?;
    let report = validate_opm(&opm);
    if !report.is_valid() {
        return Err(CliError::validation(format!("{}: invalid OPM graph\n{report}", file.display())));
    }
    for w in report.warnings() {
        eprintln!("{w}");
    }
    let text = serialize_opm(&opm);
    if ws.read(SOURCE)?.as_deref() != Some(text.as_str()) {
        reset_derived(&mut ws)?;
        ws.write(SOURCE, &text)?;
        ws.manifest.clock = opm
            .edges
            .iter()
            .flat_map(|e| e.time)
            .max()
            .map_or(0, |t| t.0);
        ws.save()?;
    }
    emit(out, &format!("{}\n", opm.summary()))
}

pub fn convert(dir: &Path, force: bool, out: &mut dyn Write) -> Result<()> {
    let mut ws = Workspace::open(dir)?;
    let Some(text) = ws.read(SOURCE)? else {
        return Err(CliError::refused("no OPM graph loaded; run `tpm load <file.opm>` first"));
    };
    if ws.has(GRAPH) && !force {
        return Err(CliError::refused("workspace is already converted; pass --force to convert again"));
    }
    let opm = parse_opm_bytes(text.as_bytes()).map_err(|e| CliError::parse(format!("{SOURCE}: {e}")))?;
    let (graph, report) = convert_opm(&opm).map_err(|e| match e {
        ConversionError::Invalid(r) => CliError::validation(format!("invalid OPM graph\n{r}")),
        ConversionError::Graph(g) => CliError::validation(g.to_string()),
    })?;
    reset_derived(&mut ws)?;
    ws.manifest.clock = graph.max_time().map_or(0, |t| t.0).max(ws.manifest.clock);
    let text = format!("{report}\n{}", instance_table(&graph));
    ws.store_engine(&Engine::new(graph))?;
    emit(out, &text)
}

/// One line per artifact and agent: instance count and instants.
pub fn instance_table(g: &TpmGraph) -> String {
    let mut by_entity: BTreeMap<(NodeKind, &str), Vec<Timestamp>> = BTreeMap::new();
    for (_, n) in g.nodes() {
        if matches!(n.kind, NodeKind::ArtifactInstance | NodeKind::AgentInstance) {
            by_entity.entry((n.kind, n.entity.as_str())).or_default().push(n.time());
        }
    }
    let width = by_entity.keys().map(|(_, e)| e.len()).max().unwrap_or(0);
    let mut text = String::new();
    for ((kind, entity), mut times) in by_entity {
        times.sort();
        let times: Vec<String> = times.iter().map(|t| format!("t{}", t.0)).collect();
        let kind = if kind == NodeKind::ArtifactInstance { "artifact" } else { "agent" };
        text.push_str(&format!("{kind:<8} {entity:<width$} {:>3}  {}\n", times.len(), times.join(" ")));
    }
    text
}

fn read_query_input(input: &str) -> Result<String> {
    if input == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io("standard input", e))?;
        return Ok(s);
    }
    let path = Path::new(input);
    if path.is_file() {
        return fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e));
    }
    Ok(input.to_owned())
}

fn engine_with(ws: &Workspace, max_path_len: Option<usize>) -> Result<Engine> {
    let mut engine = ws.engine()?;
    let mut options = EngineOptions::default();
    options.path.max_path_len = max_path_len;
    engine.options = options;
    Ok(engine)
}

/// Run one statement and render its result.
pub fn run_statement(engine: &mut Engine, text: &str, now: Timestamp, format: Format) -> Result<String> {
    let stmt = parse_query(text).map_err(|e| CliError::query(e.to_string()))?;
    match engine.execute(&stmt, now)? {
        Outcome::Rows(rows) => Ok(match format {
            Format::Tsv => rows.to_tsv(),
            Format::Dot => {
                let ids = rows
                    .rows
                    .iter()
                    .flatten()
                    .filter_map(|c| match c {
                        tpm::eval::Cell::Node(id) => engine.graph().index_of(id),
                        _ => None,
                    });
                graph_to_dot(&engine.graph().induced(ids), "result")
            }
        }),
        Outcome::Materialized(name) => {
            let m = engine.materialized(&name).expect("just materialized");
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            Ok(match format {
                Format::Tsv => format!("{}\n", m.summary()),
                Format::Dot => materialized_to_dot(engine.graph(), m),
            })
        }
    }
}

pub fn query(
    dir: &Path,
    input: &str,
    format: Format,
    max_path_len: Option<usize>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut ws = Workspace::open(dir)?;
    let mut engine = engine_with(&ws, max_path_len)?;
    let text = read_query_input(input)?;
    let statements = split_statements(&text).map_err(|e| CliError::query(e.to_string()))?;
    if statements.is_empty() {
        return Err(CliError::query("no statement to run"));
    }
    let mut changed = false;
    for s in statements {
        let result = run_statement(&mut engine, &s, ws.clock(), format);
        changed |= result.is_ok() && parse_query(&s).is_ok_and(|st| st.defines().is_some());
        match result {
            Ok(text) => emit(out, &text)?,
            Err(e) => {
                if changed {
                    ws.store_engine(&engine)?;
                }
                return Err(e);
            }
        }
    }
    if changed {
        ws.store_engine(&engine)?;
    }
    Ok(())
}

pub fn export_dot(dir: &Path, target: &str, file: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let ws = Workspace::open(dir)?;
    let engine = ws.engine()?;
    let dot = if target == "graph" {
        graph_to_dot(engine.graph(), "tpm")
    } else {
        let m = engine
            .materialized(target)
            .ok_or_else(|| CliError::query(format!("unknown target `{target}`; use `graph` or a folder/path node name")))?;
        materialized_to_dot(engine.graph(), m)
    };
    match file {
        Some(path) => fs::write(path, dot).map_err(|e| CliError::io(path.display(), e)),
        None => emit(out, &dot),
    }
}

/// Advance the workspace clock to `t` and run the pull agents due by then.
pub fn tick(dir: &Path, t: Timestamp, out: &mut dyn Write) -> Result<()> {
    let mut ws = Workspace::open(dir)?;
    let mut engine = ws.engine()?;
    let text = tick_engine(&mut ws, &mut engine, t)?;
    ws.store_engine(&engine)?;
    emit(out, &text)
}

pub fn tick_engine(ws: &mut Workspace, engine: &mut Engine, t: Timestamp) -> Result<String> {
    if t < ws.clock() {
        return Err(CliError::refused(format!(
            "cannot move the clock back from t{} to t{}",
            ws.manifest.clock, t.0
        )));
    }
    let before = engine.failures().len();
    let runs = engine.tick(t);
    for f in &engine.failures()[before..] {
        eprintln!("agent failure: {f}");
    }
    ws.manifest.clock = t.0;
    let mut text = String::new();
    for r in runs.iter().filter(|r| !r.delta.is_empty()) {
        text.push_str(&r.delta.log_line(&r.agent_id));
        text.push('\n');
    }
    if runs.is_empty() {
        text.push_str("no agent due\n");
    } else if text.is_empty() {
        text.push_str(&format!("{} agent(s) ran, no change\n", runs.len()));
    }
    Ok(text)
}
