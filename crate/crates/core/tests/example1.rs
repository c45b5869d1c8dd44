mod common;

use std::collections::BTreeSet;

use common::*;
use tpm::eval::Cell;
use tpm::query::{parse_query, print_query, Statement};
use tpm::{Engine, Outcome, Relation, Timestamp};

fn ids(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn conversion_instances() {
    let g = example1();
    let times = |entity: &str| -> Vec<u64> {
        let mut v: Vec<u64> = g.instances_of(&tpm::EntityId::new(entity)).iter().map(|n| n.time().0).collect();
        v.sort();
        v
    };
    assert_eq!(times("Analysis.doc"), vec![3, 4, 5, 6]);
    assert_eq!(times("Alex"), vec![1, 6]);
    assert_eq!(times("Brainstorming.doc"), vec![1, 2, 4]);
    for (ix, e) in g.edges() {
        if e.relation == Relation::HappenedBefore {
            let (a, b) = g.ends(ix);
            let gap = g.node(a).time().0.abs_diff(g.node(b).time().0);
            assert_eq!(e.weight, Some(gap), "{e:?}");
        }
    }
    assert!(g.invariant_violations().is_empty());
}

#[test]
fn example_queries_parse_and_round_trip() {
    for q in EXAMPLE_QUERIES {
        let stmt = parse_query(q).unwrap_or_else(|e| panic!("{q}: {e}"));
        let again = parse_query(&print_query(&stmt)).unwrap();
        assert_eq!(stmt, again);
    }
    let Statement::Fconstruct(f) = parse_query(EXAMPLE2).unwrap() else { panic!() };
    assert_eq!(f.body.patterns.len(), 7);
    assert_eq!(f.body.filters.len(), 1);
}

fn folder_at(engine: &mut Engine, t: u64) -> BTreeSet<String> {
    engine.construct(&parse_query(EXAMPLE2).unwrap(), Timestamp(t)).unwrap();
    engine.materialized("analysis_process").unwrap().members.clone()
}

#[test]
fn folder_evolution() {
    let mut full = engine();
    assert_eq!(folder_at(&mut full, 6), ids(&["Event-3@3", "Event-4@4", "Event-5@5", "Event-6@6"]));

    // Grow the graph tick by tick and let the pull agent follow.
    let g = example1();
    let mut eng = Engine::new(g.window(Timestamp(0), Timestamp(3)).unwrap());
    eng.construct(&parse_query(EXAMPLE2).unwrap(), Timestamp(3)).unwrap();
    assert_eq!(eng.materialized("analysis_process").unwrap().members, ids(&["Event-3@3"]));
    for t in 4..=6 {
        *eng.graph_mut() = with_container(&g.window(Timestamp(0), Timestamp(t)).unwrap(), &eng);
        eng.tick(Timestamp(t));
    }
    assert_eq!(eng.evolution_at("analysis_process", Timestamp(3)).unwrap(), ids(&["Event-3@3"]));
    assert_eq!(
        eng.evolution_at("analysis_process", Timestamp(5)).unwrap(),
        ids(&["Event-3@3", "Event-4@4", "Event-5@5"])
    );
    assert_eq!(
        eng.evolution_at("analysis_process", Timestamp(6)).unwrap(),
        ids(&["Event-3@3", "Event-4@4", "Event-5@5", "Event-6@6"])
    );
}

/// `window` with the engine's container nodes carried over.
fn with_container(base: &tpm::TpmGraph, eng: &Engine) -> tpm::TpmGraph {
    let mut g = base.clone();
    for m in eng.catalog() {
        if let Some(n) = eng.graph().node_by_id(&m.name) {
            g.add_node(n.clone()).unwrap();
        }
    }
    g
}

#[test]
fn derivation_paths() {
    let mut eng = engine();
    eng.construct(&parse_query(EXAMPLE5).unwrap(), Timestamp(6)).unwrap();
    let m = eng.materialized("analysisDoc_derivation").unwrap();
    let paths: Vec<Vec<String>> = m.paths.iter().map(|p| p.nodes.clone()).collect();
    let expect: Vec<Vec<String>> = [
        vec!["Analysis.doc@6", "Analysis.doc@5", "Sample_Analysis.pdf@4"],
        vec!["Analysis.doc@6", "Analysis.doc@5", "Analysis.doc@4", "Analysis.doc@3"],
        vec!["Analysis.doc@6", "Analysis.doc@5", "Analysis.doc@4", "Brainstorming.doc@2", "Brainstorming.doc@1"],
    ]
    .iter()
    .map(|p| p.iter().map(|s| s.to_string()).collect())
    .collect();
    assert_eq!(paths, expect);
    assert_eq!(m.summary(), "analysisDoc_derivation (path, 3 paths)");

    let trunc = eng.truncated_paths_at("analysisDoc_derivation", Timestamp(4)).unwrap();
    let sets: Vec<BTreeSet<String>> = trunc.into_iter().map(|p| p.into_iter().collect()).collect();
    assert_eq!(
        sets,
        vec![
            ids(&["Sample_Analysis.pdf@4"]),
            ids(&["Analysis.doc@4", "Analysis.doc@3"]),
            ids(&["Analysis.doc@4", "Brainstorming.doc@2", "Brainstorming.doc@1"]),
        ]
    );

    // The same truncation through the apply form.
    let Outcome::Rows(rows) = eng.execute_str(EXAMPLE6, Timestamp(6)).unwrap() else { panic!() };
    let ix = rows.path_index.clone().unwrap();
    for (p, want) in sets.iter().enumerate() {
        let got: BTreeSet<String> = rows
            .rows
            .iter()
            .zip(&ix)
            .filter(|(_, i)| **i == p + 1)
            .map(|(r, _)| r[0].to_string())
            .collect();
        assert_eq!(&got, want, "path {}", p + 1);
    }
}

#[test]
fn timeseries_chain() {
    let mut eng = engine();
    eng.construct(&parse_query(EXAMPLE4).unwrap(), Timestamp(6)).unwrap();
    let m = eng.materialized("analysisDoc_timeseries").unwrap();
    assert_eq!(m.paths.len(), 1);
    assert_eq!(
        m.paths[0].nodes,
        vec!["Analysis.doc@6", "Analysis.doc@5", "Analysis.doc@4", "Analysis.doc@3"]
    );
    let Outcome::Rows(rows) = eng.execute_str(TIMESERIES_APPLY, Timestamp(6)).unwrap() else { panic!() };
    let got: BTreeSet<String> = rows.rows.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(got, ids(&["Analysis.doc@3", "Analysis.doc@4", "Analysis.doc@5"]));
}

#[test]
fn folder_apply_and_doc_ids() {
    let mut eng = engine();
    eng.construct(&parse_query(EXAMPLE2).unwrap(), Timestamp(6)).unwrap();
    let Outcome::Rows(rows) = eng.execute_str(EXAMPLE3, Timestamp(6)).unwrap() else { panic!() };
    let got: BTreeSet<String> = rows.column("a").unwrap().into_iter().map(Cell::to_string).collect();
    assert_eq!(got, ids(&["Event-3@3", "Event-4@4", "Event-5@5"]));

    // The folder holds events only, so the artifact lookup finds nothing there.
    let Outcome::Rows(rows) = eng.execute_str(DOCID_APPLY, Timestamp(6)).unwrap() else { panic!() };
    assert!(rows.is_empty());

    let q = "select distinct ?docID where { ?a @isA entityNode. ?a @type artifact. ?a @id `Analysis.doc'. ?a @timestamp ?ts. ?a wasDerivedFrom ?a2. ?a2 @id ?docID. filter(Timesemantic(?ts,[t3,?,?,t6])). }";
    let Outcome::Rows(rows) = eng.execute_str(q, Timestamp(6)).unwrap() else { panic!() };
    let got: BTreeSet<String> = rows.rows.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(got, ids(&["Brainstorming.doc", "Sample_Analysis.pdf"]));
}

#[test]
fn folder_evolution_from_full_history() {
    let mut eng = engine();
    eng.construct(&parse_query(EXAMPLE2).unwrap(), Timestamp(6)).unwrap();
    assert_eq!(eng.evolution_at("analysis_process", Timestamp(2)).unwrap(), ids(&[]));
    assert_eq!(eng.evolution_at("analysis_process", Timestamp(3)).unwrap(), ids(&["Event-3@3"]));
    assert_eq!(
        eng.evolution_at("analysis_process", Timestamp(5)).unwrap(),
        ids(&["Event-3@3", "Event-4@4", "Event-5@5"])
    );
    assert_eq!(
        eng.evolution_at("analysis_process", Timestamp(6)).unwrap(),
        ids(&["Event-3@3", "Event-4@4", "Event-5@5", "Event-6@6"])
    );
}
