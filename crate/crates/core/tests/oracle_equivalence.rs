use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tpm::eval::{match_paths, PathOptions};
use tpm::query::{parse_query, Statement};
use tpm::reachability::{oracle_match, OraclePath};
use tpm::testkit::{random_path_case, random_point_graph};
use tpm::TpmGraph;

fn eval_paths(graph: &TpmGraph, text: &str) -> Vec<OraclePath> {
    let Statement::Pconstruct(pc) = parse_query(text).unwrap() else { panic!() };
    let walks = match_paths(graph, &pc, None, &PathOptions::default()).unwrap();
    walks
        .iter()
        .map(|w| OraclePath {
            nodes: w.nodes.iter().map(|&n| graph.node(n).id.clone()).collect(),
            edges: w
                .edges
                .iter()
                .map(|&e| {
                    let r = graph.edge(e);
                    (r.from.clone(), r.relation, r.to.clone())
                })
                .collect(),
        })
        .collect()
}

#[test]
fn evaluator_agrees_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases: Vec<_> = (0..50).map(|_| random_path_case(&mut rng)).collect();
    let mut nonempty = 0;
    for g in 0..200 {
        let graph = random_point_graph(&mut rng, 12);
        for (c, case) in cases.iter().enumerate() {
            let text = case.query_text("p");
            let (classes, options) = case.oracle_inputs(&graph);
            let pc = match parse_query(&text).unwrap() {
                Statement::Pconstruct(pc) => pc,
                _ => unreachable!(),
            };
            let mut want = oracle_match(&graph, &pc.regex, &classes, &options).unwrap();
            let mut got = eval_paths(&graph, &text);
            // Walks with equal node sequences may differ in edge order.
            want.sort();
            got.sort();
            assert_eq!(got, want, "graph {g}, case {c}: {text}");
            nonempty += usize::from(!want.is_empty());
        }
    }
    // Guard against a generator that only produces empty results.
    assert!(nonempty > 1000, "only {nonempty} non-empty comparisons");
}
