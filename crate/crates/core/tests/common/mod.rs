#![allow(dead_code)]

use std::path::PathBuf;

use tpm::convert::convert;
use tpm::opm::parse_opm;
use tpm::{Engine, TpmGraph};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn example1() -> TpmGraph {
    let text = std::fs::read_to_string(fixture("example1.opm")).unwrap();
    let opm = parse_opm(&text).unwrap();
    convert(&opm).unwrap().0
}

pub fn engine() -> Engine {
    Engine::new(example1())
}

pub const EXAMPLE2: &str = "fconstruct analysis_process as ?anlPrs select ?e where { ?anlPrs @timed true. ?anlPrs @isA folderNode. ?anlPrs @type process. ?anlPrs @description `analysis activities'. ?e @isA entityNode. ?e @type event. ?e @timestamp ?ts. FILTER ( Timesemantic(?ts, [t3,?,?,t6]) ). }";

pub const DOCID_APPLY: &str = "(analysis_process) apply ( select ?docID where { ?a @isA entityNode. ?a @type artifact. ?a @id `Analysis.doc'. ?a @timestamp ?ts. ?a wasDerivedFrom ?a2. ?a2 @id ?docID. filter(Timesemantic(?ts,[t,?,?,t+d])). } )";

pub const EXAMPLE3: &str = "(analysis_process) apply ( select * where { ?a @isA entityNode. ?a @timestamp ?ts. filter( Timesemantic(?ts,[?,?,?,t5]) ). } )";

pub const EXAMPLE4: &str = "pconstruct analysisDoc_timeseries ( , ,?node (?edge ?node)+) as ?anlDocTS where { ?anlDocTS @timed true. ?anlDocTS @isA pathNode. ?anlDocTS @type timeseries. ?anlDocTS @description `artifact timeseries'. ?node @isA entityNode. ?node @Type artifact. ?node @id `Analysis.doc'. ?edge @isA edge. ?edge @label happenedBefore. }";

pub const EXAMPLE5: &str = "pconstruct analysisDoc_derivation ( , ,?artifact (?edge ?artifact)+ (?e ?n)*) as ?anlDocDRV where { ?anlDocDRV @isA pathNode. ?anlDocDRV @timed true. ?anlDocDRV @type derivation. ?anlDocDRV @description `artifact derivation'. ?artifact @isA entityNode. ?artifact @id `Analysis.doc'. ?edge @isA edge. ?edge @label happenedBefore. ?n @isA entityNode. ?e @isA edge. ?e @label ?label. FILTER (?label=wasDerivedFrom || ?label=happenedBefore). }";

pub const TIMESERIES_APPLY: &str = "(analysisDoc_timeseries) apply ( select * where { ?a @isA entityNode. ?a @timestamp ?ts. filter( Timesemantic(?ts,[t3,?,?,t5]) ). })";

pub const EXAMPLE6: &str = "(analysisDoc_derivation) apply ( select * where { ?a @isA entityNode. ?a @timestamp ?ts. filter( Timesemantic(?ts,[?,?,?,t4]) ). })";

pub const EXAMPLE_QUERIES: [&str; 7] = [EXAMPLE2, DOCID_APPLY, EXAMPLE3, EXAMPLE4, EXAMPLE5, TIMESERIES_APPLY, EXAMPLE6];
