mod common;

use std::fs;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tpm::native::{parse_tpm, serialize_tpm};
use tpm::opm::{parse_opm, serialize_opm};
use tpm::query::{parse_query, print_query};
use tpm::testkit::{random_point_graph, random_query_text};

fn fixtures(ext: &str) -> Vec<(String, String)> {
    let dir = common::fixture("");
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .map(|p| (p.display().to_string(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn opm_fixtures_round_trip() {
    let all = fixtures("opm");
    assert!(all.len() >= 2);
    for (path, text) in all {
        let g = parse_opm(&text).unwrap_or_else(|e| panic!("{path}: {e}"));
        let printed = serialize_opm(&g);
        assert_eq!(parse_opm(&printed).unwrap(), g, "{path}");
        assert_eq!(serialize_opm(&parse_opm(&printed).unwrap()), printed, "{path}");
    }
}

#[test]
fn tpm_fixtures_round_trip() {
    let all = fixtures("tpm");
    assert!(all.len() >= 2);
    for (path, text) in all {
        let g = parse_tpm(&text).unwrap_or_else(|e| panic!("{path}: {e}"));
        assert_eq!(serialize_tpm(&g), text, "{path}");
        assert_eq!(parse_tpm(&serialize_tpm(&g)).unwrap().canonical(), g.canonical(), "{path}");
    }
}

#[test]
fn converted_fixture_matches_stored_native_file() {
    let stored = fs::read_to_string(common::fixture("example1.tpm")).unwrap();
    assert_eq!(serialize_tpm(&common::example1()), stored);
}

#[test]
fn generated_queries_print_and_parse_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..500 {
        let text = random_query_text(&mut rng);
        let stmt = parse_query(&text).unwrap_or_else(|e| panic!("query {i}: {e}\n{text}"));
        let printed = print_query(&stmt);
        let again = parse_query(&printed).unwrap_or_else(|e| panic!("query {i}: {e}\n{printed}"));
        assert_eq!(again, stmt, "query {i}:\n{text}\n{printed}");
        assert_eq!(print_query(&again), printed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn random_graphs_round_trip(seed in any::<u64>()) {
        let g = random_point_graph(&mut ChaCha8Rng::seed_from_u64(seed), 12);
        let text = serialize_tpm(&g);
        let back = parse_tpm(&text).unwrap();
        prop_assert_eq!(back.canonical(), g.canonical());
        prop_assert_eq!(serialize_tpm(&back), text);
    }
}
