//! Synthetic provenance benchmark: the same workload queried as a TPM graph
//! and as a plain entity-level OPM graph.
//!
//! The generator models a course project. Events happen one per
//! `spacing` ticks. Every `interactions_per_process` consecutive events
//! belong to one process instance (a project phase) and become a folder on
//! conversion. Each event
//!
//! * is controlled by a random agent,
//! * uses 1 or 2 artifacts that already exist (none for the very first),
//! * generates one artifact: with probability `rewrite_prob` one it just
//!   used (a new version of the same document), otherwise a fresh artifact
//!   while the pool lasts, otherwise a random existing one,
//! * with probability `derive_prob` records that the generated artifact was
//!   derived from the first artifact it used.
//!
//! Rewrites are what give the entity-level OPM graph its cycles: the process
//! both uses and generates the same artifact entity.
//!
//! The query suite follows the why/how/where/when split over `subjects`
//! seeded artifacts:
//!
//! * why: derivation paths from the artifact,
//! * how: paths over generation, use and derivation,
//! * where: the process(es) that generated it (paths of length 1),
//! * when: the events that used it. TPM restricts to a time window over the
//!   second half of the run; OPM can only list every recorded use.
//!
//! TPM queries start from the artifact's latest generated instance and run through the
//! query engine. OPM queries run over the entity graph after duplicate
//! dependencies are merged and cycles are broken.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tpm::convert::convert;
use tpm::eval::Orientation;
use tpm::opm::{OpmEdge, OpmGraph, OpmKind, OpmNode};
use tpm::query::parse_query;
use tpm::reachability::{eliminate_cycles, traverse_paths, Digraph};
use tpm::{Engine, Outcome, Relation, Timestamp, TpmGraph};

pub const DEFAULT_SIZES: [usize; 3] = [1000, 2000, 4000];
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_MAX_PATH_LEN: usize = 4;
const RUNS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub events: usize,
    pub agents: usize,
    pub artifacts: usize,
    pub interactions_per_process: usize,
    pub spacing: u64,
    pub rewrite_prob: f64,
    pub derive_prob: f64,
}

impl GeneratorConfig {
    /// Defaults scaled to `events`: one artifact per 8 events, one agent per
    /// 100 (at least 2 of each unless there are no events), ten interactions per process instance.
    pub fn for_events(events: usize) -> Self {
        let floor = if events == 0 { 0 } else { 2 };
        GeneratorConfig {
            events,
            agents: (events / 100).max(floor),
            artifacts: (events / 8).max(floor),
            interactions_per_process: 10,
            spacing: 1,
            rewrite_prob: 0.3,
            derive_prob: 0.6,
        }
    }

    pub fn processes(&self) -> usize {
        self.events.div_ceil(self.interactions_per_process.max(1))
    }
}

pub fn synthetic_opm(cfg: &GeneratorConfig, seed: u64) -> OpmGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = OpmGraph::new();
    for a in 0..cfg.agents {
        g.add_node(OpmNode::new(format!("agent{a}"), OpmKind::Agent));
    }
    let mut pool: Vec<String> = Vec::new();
    let mut fresh = 0usize;
    for i in 0..cfg.events {
        let t = (i as u64 + 1) * cfg.spacing;
        let event = format!("Event-{}", i + 1);
        let phase = i / cfg.interactions_per_process.max(1);
        g.add_node(
            OpmNode::new(&event, OpmKind::Process)
                .with_attr("process_instance", format!("phase{phase}"))
                .with_attr("process_type", "project_phase"),
        );
        let agent = format!("agent{}", rng.gen_range(0..cfg.agents.max(1)));
        g.add_edge(OpmEdge::new(&event, Relation::WasControlledBy, agent).at(t));

        let mut used: Vec<String> = Vec::new();
        if !pool.is_empty() {
            let k = rng.gen_range(1..=2).min(pool.len());
            used = pool.choose_multiple(&mut rng, k).cloned().collect();
            used.sort();
        }
        for a in &used {
            g.add_edge(OpmEdge::new(&event, Relation::Used, a).at(t));
        }

        let generated = if !used.is_empty() && rng.gen_bool(cfg.rewrite_prob) {
            used[rng.gen_range(0..used.len())].clone()
        } else if fresh < cfg.artifacts {
            let a = format!("doc{fresh}");
            fresh += 1;
            g.add_node(OpmNode::new(&a, OpmKind::Artifact));
            pool.push(a.clone());
            a
        } else {
            pool[rng.gen_range(0..pool.len())].clone()
        };
        g.add_edge(OpmEdge::new(&generated, Relation::WasGeneratedBy, &event).at(t));
        if let Some(source) = used.first() {
            if rng.gen_bool(cfg.derive_prob) {
                g.add_edge(OpmEdge::new(&generated, Relation::WasDerivedFrom, source).at(t));
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum QueryKind {
    Why,
    How,
    Where,
    When,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [QueryKind::Why, QueryKind::How, QueryKind::Where, QueryKind::When];

    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Why => "why",
            QueryKind::How => "how",
            QueryKind::Where => "where",
            QueryKind::When => "when",
        }
    }

    fn relations(self) -> &'static [Relation] {
        match self {
            QueryKind::Why => &[Relation::WasDerivedFrom],
            QueryKind::How => &[Relation::WasGeneratedBy, Relation::Used, Relation::WasDerivedFrom],
            QueryKind::Where => &[Relation::WasGeneratedBy],
            QueryKind::When => &[Relation::Used],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub kind: QueryKind,
    pub subject: String,
    pub tpm_paths: usize,
    pub opm_paths: usize,
    pub tpm_time: Duration,
    pub opm_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeReport {
    pub events: usize,
    pub opm_nodes: usize,
    pub opm_edges: usize,
    pub tpm_nodes: usize,
    pub tpm_edges: usize,
    pub opm_cycles_removed: usize,
    pub tpm_cycles_removed: usize,
    pub queries: Vec<QueryResult>,
    /// Generation, conversion and both query suites.
    pub total_time: Duration,
}

impl SizeReport {
    pub fn paths(&self, kind: QueryKind) -> (usize, usize) {
        self.queries
            .iter()
            .filter(|q| q.kind == kind)
            .fold((0, 0), |(t, o), q| (t + q.tpm_paths, o + q.opm_paths))
    }

    pub fn tpm_query_time(&self) -> Duration {
        self.queries.iter().map(|q| q.tpm_time).sum()
    }

    pub fn opm_query_time(&self) -> Duration {
        self.queries.iter().map(|q| q.opm_time).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub seed: u64,
    pub max_path_len: usize,
    pub sizes: Vec<SizeReport>,
}

impl BenchReport {
    /// Least-squares slope of log(TPM query time) against log(TPM node
    /// count), over the sizes with a non-empty graph.
    pub fn tpm_exponent(&self) -> Option<f64> {
        fit_exponent(
            &self
                .sizes
                .iter()
                .map(|s| (s.tpm_nodes as f64, s.tpm_query_time().as_secs_f64()))
                .collect::<Vec<_>>(),
        )
    }

    pub fn opm_exponent(&self) -> Option<f64> {
        fit_exponent(
            &self
                .sizes
                .iter()
                .map(|s| (s.opm_nodes as f64, s.opm_query_time().as_secs_f64()))
                .collect::<Vec<_>>(),
        )
    }

    /// Sizes, counts and paths; identical across runs with the same seed.
    pub fn counts_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed {}, max path length {}", self.seed, self.max_path_len);
        let _ = writeln!(
            out,
            "{:>7} {:>9} {:>9} {:>9} {:>9} {:>11} {:>11}",
            "events", "opm_nodes", "opm_edges", "tpm_nodes", "tpm_edges", "opm_cycles", "tpm_cycles"
        );
        for s in &self.sizes {
            let _ = writeln!(
                out,
                "{:>7} {:>9} {:>9} {:>9} {:>9} {:>11} {:>11}",
                s.events, s.opm_nodes, s.opm_edges, s.tpm_nodes, s.tpm_edges, s.opm_cycles_removed, s.tpm_cycles_removed
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>7} {:<6} {:>9} {:>9}", "events", "query", "tpm_paths", "opm_paths");
        for s in &self.sizes {
            for k in QueryKind::ALL {
                let (t, o) = s.paths(k);
                let _ = writeln!(out, "{:>7} {:<6} {:>9} {:>9}", s.events, k.name(), t, o);
            }
        }
        out
    }

    /// Wall-clock times, minimum of several runs per query.
    pub fn timings_table(&self) -> String {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let mut out = String::new();
        let _ = writeln!(out, "{:>7} {:>12} {:>12} {:>12}", "events", "tpm_ms", "opm_ms", "total_ms");
        for s in &self.sizes {
            let _ = writeln!(
                out,
                "{:>7} {:>12.3} {:>12.3} {:>12.3}",
                s.events,
                ms(s.tpm_query_time()),
                ms(s.opm_query_time()),
                ms(s.total_time)
            );
        }
        let fmt = |x: Option<f64>| x.map_or("n/a".to_owned(), |x| format!("{x:.2}"));
        let _ = writeln!(
            out,
            "fit exponent (query time vs nodes): tpm {}, opm {}",
            fmt(self.tpm_exponent()),
            fmt(self.opm_exponent())
        );
        out
    }

    pub fn render(&self) -> String {
        format!("{}\ntimings\n{}", self.counts_table(), self.timings_table())
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`. Points with a
/// non-positive coordinate are skipped; fewer than two points give `None`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Entity-level causal graph with duplicate dependencies merged.
fn opm_entity_graph(opm: &OpmGraph) -> Digraph {
    let mut d = Digraph::new();
    for n in &opm.nodes {
        d.add_node(&n.id);
    }
    let mut seen = BTreeSet::new();
    for e in opm.edges.iter().filter(|e| e.relation.is_causal()) {
        if seen.insert((&e.from, e.relation, &e.to)) {
            d.add_edge(&e.from, e.relation, &e.to);
        }
    }
    d
}

fn timed<T>(mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut value = None;
    for _ in 0..RUNS {
        let start = Instant::now();
        let v = f();
        best = best.min(start.elapsed());
        value = Some(v);
    }
    (value.expect("at least one run"), best)
}

fn quote(s: &str) -> String {
    format!("`{s}'")
}

fn tpm_query(kind: QueryKind, subject: &str, latest: &str, from: u64, to: u64) -> String {
    match kind {
        QueryKind::When => format!(
            "select ?e where {{ ?e used ?a. ?a @id {}. ?e @timestamp ?ts. filter(Timesemantic(?ts, [t{from},?,?,t{to}])). }}",
            quote(subject)
        ),
        _ => {
            let labels: Vec<String> = kind.relations().iter().map(|r| format!("?l = {r}")).collect();
            format!(
                "pconstruct q ({}, , ?s (?e ?n)+) as ?p where {{ ?p @isA pathNode. ?e @isA edge. ?e @label ?l. filter({}). }}",
                quote(latest),
                labels.join(" || ")
            )
        }
    }
}

fn run_tpm(graph: &TpmGraph, text: &str, max_len: usize, now: Timestamp) -> usize {
    let stmt = parse_query(text).expect("bench queries parse");
    let mut engine = Engine::new(graph.clone());
    engine.options.path.max_path_len = Some(max_len);
    engine.options.path.orientation = Orientation::Lineage;
    match engine.execute(&stmt, now).expect("bench queries evaluate") {
        Outcome::Rows(rows) => rows.len(),
        Outcome::Materialized(name) => engine.materialized(&name).map_or(0, |m| m.paths.len()),
    }
}

fn run_size(events: usize, seed: u64, max_path_len: usize, subjects: usize) -> SizeReport {
    let started = Instant::now();
    let cfg = GeneratorConfig::for_events(events);
    let opm = synthetic_opm(&cfg, seed);
    let graph = if opm.is_empty() {
        TpmGraph::new()
    } else {
        convert(&opm).expect("synthetic graphs convert").0
    };

    let entity = opm_entity_graph(&opm);
    let (dag, removed) = eliminate_cycles(&entity);
    let (_, tpm_removed) = eliminate_cycles(&Digraph::from_tpm(&graph, Orientation::Lineage));

    let mut candidates: Vec<&str> = opm
        .edges
        .iter()
        .filter(|e| e.relation == Relation::WasGeneratedBy)
        .map(|e| e.from.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    candidates.shuffle(&mut rng);
    candidates.truncate(subjects);
    candidates.sort();

    let now = Timestamp(cfg.events as u64 * cfg.spacing);
    let window = (now.0 / 2, now.0);
    let mut queries = Vec::new();
    for subject in candidates {
        let latest = opm
            .edges
            .iter()
            .filter(|e| e.relation == Relation::WasGeneratedBy && e.from == subject)
            .filter_map(|e| e.time)
            .max()
            .map(|t| format!("{subject}@{}", t.0))
            .expect("subjects are generated");
        for kind in QueryKind::ALL {
            let max_len = if kind == QueryKind::Where { 1 } else { max_path_len };
            let text = tpm_query(kind, subject, &latest, window.0, window.1);
            let (tpm_paths, tpm_time) = timed(|| run_tpm(&graph, &text, max_len, now));
            let (opm_paths, opm_time) = timed(|| match kind {
                QueryKind::When => opm
                    .edges
                    .iter()
                    .filter(|e| e.relation == Relation::Used && e.to == subject)
                    .count(),
                _ => {
                    let rels = kind.relations();
                    traverse_paths(&dag, |n| n == subject, |_| true, |e| rels.contains(&e.relation), Some(max_len)).len()
                }
            });
            queries.push(QueryResult {
                kind,
                subject: subject.to_owned(),
                tpm_paths,
                opm_paths,
                tpm_time,
                opm_time,
            });
        }
    }
    SizeReport {
        events,
        opm_nodes: opm.nodes.len(),
        opm_edges: opm.edges.len(),
        tpm_nodes: graph.nodes().count(),
        tpm_edges: graph.edges().count(),
        opm_cycles_removed: removed.len(),
        tpm_cycles_removed: tpm_removed.len(),
        queries,
        total_time: started.elapsed(),
    }
}

/// Generate, convert and query every size in turn.
pub fn run_bench(sizes: &[usize], seed: u64, max_path_len: usize) -> BenchReport {
    BenchReport {
        seed,
        max_path_len,
        sizes: sizes.iter().map(|&n| run_size(n, seed, max_path_len, 4)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(1.5))).collect();
        assert!((fit_exponent(&pts).unwrap() - 1.5).abs() < 1e-9);
        assert_eq!(fit_exponent(&pts[..1]), None);
    }

    #[test]
    fn generator_is_seeded() {
        let cfg = GeneratorConfig::for_events(200);
        assert_eq!(synthetic_opm(&cfg, 1), synthetic_opm(&cfg, 1));
        assert_ne!(synthetic_opm(&cfg, 1), synthetic_opm(&cfg, 2));
        assert_eq!(synthetic_opm(&cfg, 1).count(OpmKind::Process), 200);
    }
}
