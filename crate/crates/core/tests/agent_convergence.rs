use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tpm::testkit::{random_append_sequence, AppendStep, TIMED_FOLDER_QUERIES};
use tpm::{AgentMode, Engine, Timestamp, TpmGraph};

fn apply_step(engine: &mut Engine, step: &AppendStep) -> BTreeSet<String> {
    let mut changed = BTreeSet::new();
    for n in &step.nodes {
        changed.insert(engine.graph_mut().add_node(n.clone()).unwrap());
    }
    for e in &step.edges {
        engine.graph_mut().add_edge(e.clone()).unwrap();
        changed.insert(e.from.clone());
        changed.insert(e.to.clone());
    }
    changed
}

#[test]
fn pull_and_push_agents_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut nonempty = 0;
    for round in 0..100 {
        let query = *TIMED_FOLDER_QUERIES.choose(&mut rng).unwrap();
        let steps = random_append_sequence(&mut rng, 8);

        let mut pull = Engine::new(TpmGraph::new());
        pull.execute_str(query, Timestamp(0)).unwrap();
        let mut push = Engine::new(TpmGraph::new());
        push.execute_str(query, Timestamp(0)).unwrap();
        push.unregister("f").unwrap();
        push.register("f", AgentMode::push()).unwrap();

        for step in &steps {
            apply_step(&mut pull, step);
            pull.tick(Timestamp(step.at));
            let changed = apply_step(&mut push, step);
            push.notify_change(&changed, Timestamp(step.at));
            assert_eq!(
                pull.materialized("f").unwrap().members,
                push.materialized("f").unwrap().members,
                "round {round} at t{}: {query}",
                step.at
            );
        }
        assert!(pull.failures().is_empty() && push.failures().is_empty());

        // Both agree with a fresh evaluation of the final graph.
        let mut fresh = Engine::new(pull.graph().clone());
        fresh.graph_mut().remove_node("f").unwrap();
        fresh.execute_str(query, Timestamp(9)).unwrap();
        assert_eq!(fresh.materialized("f").unwrap().members, push.materialized("f").unwrap().members);
        nonempty += usize::from(!push.materialized("f").unwrap().members.is_empty());
    }
    assert!(nonempty > 50, "{nonempty}");
}
