mod common;

use std::collections::BTreeSet;

use petgraph::algo::{has_path_connecting, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tpm::eval::Orientation;
use tpm::model::{NodeKind, Relation};
use tpm::opm::parse_opm;
use tpm::query::{parse_query, Statement};
use tpm::reachability::*;
use tpm::testkit::random_point_graph;

fn lineage_edge(e: &DiEdge) -> bool {
    matches!(e.relation, Relation::HappenedBefore | Relation::WasDerivedFrom)
}

fn to_petgraph(d: &Digraph, keep: impl Fn(&DiEdge) -> bool) -> DiGraph<(), ()> {
    let mut p = DiGraph::new();
    let ix: Vec<_> = (0..d.len()).map(|_| p.add_node(())).collect();
    for e in d.edges.iter().filter(|e| keep(e)) {
        p.add_edge(ix[e.from], ix[e.to], ());
    }
    p
}

#[test]
fn three_paths_to_the_origins() {
    let tpm = common::example1();
    let d = Digraph::from_tpm(&tpm, Orientation::Lineage);
    let artifact = |id: &str| tpm.node_by_id(id).is_some_and(|n| n.kind == NodeKind::ArtifactInstance);
    let origin = |id: &str| {
        artifact(id) && {
            let ix = d.index_of(id).unwrap();
            !d.edges.iter().any(|e| e.from == ix && lineage_edge(e))
        }
    };
    let found = traverse_paths(&d, |id| id == "Analysis.doc@6", origin, lineage_edge, None);
    assert_eq!(
        found.node_ids(&d),
        vec![
            vec!["Analysis.doc@6", "Analysis.doc@5", "Sample_Analysis.pdf@4"],
            vec!["Analysis.doc@6", "Analysis.doc@5", "Analysis.doc@4", "Analysis.doc@3"],
            vec!["Analysis.doc@6", "Analysis.doc@5", "Analysis.doc@4", "Brainstorming.doc@2", "Brainstorming.doc@1"],
        ]
    );
    // Starting from every instance also counts the suffixes of those paths.
    let every = traverse_paths(&d, |id| id.starts_with("Analysis.doc@"), origin, lineage_edge, None);
    assert_eq!(every.len(), 8);
    let direct = traverse_paths(&d, |id| id == "Analysis.doc@6", |_| true, lineage_edge, Some(1));
    assert_eq!(direct.node_ids(&d), vec![vec!["Analysis.doc@6", "Analysis.doc@5"]]);
}

fn check_closure_agreement(d: &Digraph) {
    let closure = transitive_closure(d, |_| true).unwrap();
    let pg = to_petgraph(d, |_| true);
    for a in 0..d.len() {
        for b in 0..d.len() {
            let via_closure = closure.reaches_ix(a, b);
            assert_eq!(via_closure, has_path_connecting(&pg, NodeIndex::new(a), NodeIndex::new(b), None));
            if a != b {
                let found = traverse_paths(d, |id| id == d.nodes[a], |id| id == d.nodes[b], |_| true, None);
                assert_eq!(via_closure, !found.is_empty(), "{} -> {}", d.nodes[a], d.nodes[b]);
            }
        }
    }
}

#[test]
fn closure_agrees_with_traversal_on_the_fixture() {
    let tpm = common::example1();
    let mut causal = Digraph::new();
    for (_, e) in tpm.edges() {
        if e.relation.is_causal() {
            causal.add_edge(&e.from, e.relation, &e.to);
        }
    }
    check_closure_agreement(&causal);
    check_closure_agreement(&Digraph::from_tpm(&tpm, Orientation::Lineage));
}

#[test]
fn entity_level_revision_cycle_is_broken() {
    let text = std::fs::read_to_string(common::fixture("revision_cycle.opm")).unwrap();
    let d = Digraph::from_opm(&parse_opm(&text).unwrap());
    assert!(!d.is_acyclic());
    let (out, removed) = eliminate_cycles(&d);
    assert!(!removed.is_empty());
    assert!(toposort(&to_petgraph(&out, |_| true), None).is_ok());
    assert_eq!(eliminate_cycles(&d), (out, removed));

    // The converted graph has no cycle to remove.
    let tpm = tpm::convert::convert(&parse_opm(&text).unwrap()).unwrap().0;
    let (_, removed) = eliminate_cycles(&Digraph::from_tpm(&tpm, Orientation::Stored));
    assert!(removed.is_empty());
}

#[test]
fn oracle_finds_the_analysis_timeseries() {
    let tpm = common::example1();
    let Statement::Pconstruct(pc) = parse_query(common::EXAMPLE4).unwrap() else { panic!() };
    let analysis: BTreeSet<String> = tpm
        .nodes()
        .filter(|(_, n)| n.entity.as_str() == "Analysis.doc")
        .map(|(_, n)| n.id.clone())
        .collect();
    let mut classes = OracleClasses::default();
    classes.nodes.insert("node".into(), Some(analysis));
    classes.edges.insert("edge".into(), Some(BTreeSet::from([Relation::HappenedBefore])));
    let options = OracleOptions {
        max_nodes: 100,
        ..OracleOptions::default()
    };
    let paths = oracle_match(&tpm, &pc.regex, &classes, &options).unwrap();
    assert_eq!(paths.len(), 1);
    assert_eq!(paths[0].nodes, ["Analysis.doc@6", "Analysis.doc@5", "Analysis.doc@4", "Analysis.doc@3"]);

    let err = oracle_match(&tpm, &pc.regex, &classes, &OracleOptions::default()).unwrap_err();
    assert!(matches!(err, ReachError::GraphTooLarge { limit: 12, .. }));
}

fn random_digraph(seed: u64) -> Digraph {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Digraph::new();
    let n = rng.gen_range(1..10);
    for i in 0..n {
        d.add_node(&format!("v{i}"));
    }
    for _ in 0..rng.gen_range(0..20) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        d.add_edge(&format!("v{a}"), Relation::Used, &format!("v{b}"));
    }
    d
}

proptest! {
    #[test]
    fn eliminate_cycles_yields_a_dag(seed in any::<u64>()) {
        let d = random_digraph(seed);
        let (out, removed) = eliminate_cycles(&d);
        prop_assert!(toposort(&to_petgraph(&out, |_| true), None).is_ok());
        prop_assert_eq!(out.edges.len() + removed.len(), d.edges.len());
        if toposort(&to_petgraph(&d, |_| true), None).is_ok() {
            prop_assert!(removed.is_empty());
        }
    }

    #[test]
    fn closure_matches_traversal(seed in any::<u64>()) {
        check_closure_agreement(&random_digraph(seed));
        let g = random_point_graph(&mut ChaCha8Rng::seed_from_u64(seed), 12);
        check_closure_agreement(&Digraph::from_tpm(&g, Orientation::Lineage));
    }
}
