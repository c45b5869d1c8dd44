mod common;

use common::*;
use tpm::agents::AgentError;
use tpm::eval::EvalError;
use tpm::{AgentMode, Outcome, Timestamp};

#[test]
fn constructing_over_an_existing_graph_node_is_refused() {
    let mut eng = engine();
    let q = "fconstruct process:analysis as ?f select ?e where { ?e @type event. }";
    assert!(matches!(eng.execute_str(q, Timestamp(6)), Err(EvalError::NameCollision(n)) if n == "process:analysis"));
}

#[test]
fn apply_needs_a_known_container() {
    let mut eng = engine();
    let err = eng.execute_str("(nope) apply (select * where { ?a @isA entityNode. })", Timestamp(6));
    assert_eq!(err.unwrap_err(), EvalError::UnknownContainer("nope".into()));
}

#[test]
fn scope_words_outside_apply() {
    let mut eng = engine();
    let q = "select ?a where { ?a @timestamp ?ts. filter(Timesemantic(?ts, [t,?,?,t+d])). }";
    assert_eq!(eng.execute_str(q, Timestamp(6)).unwrap_err(), EvalError::NoScope);
}

#[test]
fn declared_window_must_hold_the_members() {
    let mut eng = engine();
    let q = "fconstruct early as ?f select ?e where { ?f @start t1. ?f @duration 2. ?e @type event. }";
    assert!(matches!(eng.execute_str(q, Timestamp(6)), Err(EvalError::TimeBoundViolation { .. })));
    let q = "fconstruct early as ?f select ?e where { ?f @start t1. ?f @duration 2. ?e @type event. ?e @timestamp ?ts. filter(?ts <= t3). }";
    eng.execute_str(q, Timestamp(6)).unwrap();
    let node = eng.graph().node_by_id("early").unwrap();
    assert_eq!((node.time(), node.duration), (Timestamp(1), Some(2)));
}

#[test]
fn folder_spans_its_members_and_is_queryable() {
    let mut eng = engine();
    eng.execute_str(EXAMPLE2, Timestamp(6)).unwrap();
    let node = eng.graph().node_by_id("analysis_process").unwrap();
    assert_eq!((node.time(), node.duration), (Timestamp(3), Some(3)));
    let q = "select ?f where { ?f @isA folderNode. ?f @description `analysis activities'. }";
    let Outcome::Rows(rows) = eng.execute_str(q, Timestamp(6)).unwrap() else { panic!() };
    assert_eq!(rows.rows.len(), 1);
    assert_eq!(rows.rows[0][0].to_string(), "analysis_process");
    assert_eq!(
        eng.materialized("analysis_process").unwrap().summary(),
        "analysis_process (folder, 4 members)"
    );
}

#[test]
fn agent_registration_rules() {
    let mut eng = engine();
    eng.execute_str(EXAMPLE2, Timestamp(6)).unwrap();
    assert!(matches!(
        eng.register("analysis_process", AgentMode::pull(2)),
        Err(AgentError::DuplicateRegistration(_))
    ));
    eng.unregister("analysis_process").unwrap();
    assert_eq!(eng.register("analysis_process", AgentMode::pull(0)).unwrap_err(), AgentError::ZeroInterval);
    eng.register("analysis_process", AgentMode::push()).unwrap();

    let untimed = "fconstruct plain as ?f select ?e where { ?e @type event. }";
    eng.execute_str(untimed, Timestamp(6)).unwrap();
    assert_eq!(eng.agents().count(), 1);
    assert_eq!(eng.register("plain", AgentMode::pull(1)).unwrap_err(), AgentError::NotTimed("plain".into()));
}

#[test]
fn pull_agent_respects_its_interval() {
    let g = example1();
    let mut eng = tpm::Engine::new(g.window(Timestamp(0), Timestamp(3)).unwrap());
    eng.execute_str(EXAMPLE2, Timestamp(3)).unwrap();
    eng.unregister("analysis_process").unwrap();
    eng.register("analysis_process", AgentMode::pull(2)).unwrap();
    let full = g.window(Timestamp(0), Timestamp(6)).unwrap();
    for (_, n) in full.nodes() {
        let _ = eng.graph_mut().add_node(n.clone());
    }
    for (_, e) in full.edges() {
        eng.graph_mut().add_edge(e.clone()).unwrap();
    }
    assert!(eng.tick(Timestamp(4)).is_empty());
    let runs = eng.tick(Timestamp(5));
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0].delta.added.len(), 3);
    assert_eq!(
        eng.export_log(),
        "delta agent:analysis_process 3 +Event-3@3\n\
         delta agent:analysis_process 5 +Event-4@4 +Event-5@5 +Event-6@6\n"
    );
}

#[test]
fn reconstruct_replaces_the_container() {
    let mut eng = engine();
    eng.execute_str(EXAMPLE2, Timestamp(6)).unwrap();
    let narrower = EXAMPLE2.replace("[t3,?,?,t6]", "[t5,?,?,t6]");
    eng.execute_str(&narrower, Timestamp(7)).unwrap();
    let m = eng.materialized("analysis_process").unwrap();
    assert_eq!(m.members.len(), 2);
    assert_eq!(m.evolution_log.len(), 1);
    let node = eng.graph().node_by_id("analysis_process").unwrap();
    assert_eq!(node.time(), Timestamp(5));
}
