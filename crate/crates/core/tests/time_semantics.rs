use tpm::query::time::instantiate;
use tpm::model::NodeRecord;
use tpm::query::{resolve_time_keyword, time_filter, TimeKeyword};
use tpm::{Engine, Outcome, Timestamp, TpmGraph};

/// The everyday reading of each keyword, written independently of the
/// slot templates. `before` and `after` include the boundary instant.
fn plain(kw: TimeKeyword, ts: u64, t: u64, u: u64) -> bool {
    match kw {
        TimeKeyword::In | TimeKeyword::On | TimeKeyword::At | TimeKeyword::During => ts == t,
        TimeKeyword::Since | TimeKeyword::After => ts >= t,
        TimeKeyword::Before | TimeKeyword::Till | TimeKeyword::Until | TimeKeyword::By => ts <= t,
        TimeKeyword::Between => t <= ts && ts <= u,
    }
}

#[test]
fn every_keyword_over_a_ten_by_ten_grid() {
    for kw in TimeKeyword::ALL {
        let template = resolve_time_keyword(kw.name()).unwrap();
        for ts in 0..10 {
            for t in 0..10 {
                let uppers: Vec<u64> = if kw == TimeKeyword::Between { (t..10).collect() } else { vec![t] };
                for u in uppers {
                    let interval = instantiate(template, &[Timestamp(t), Timestamp(u)]);
                    assert_eq!(
                        time_filter(Timestamp(ts), &interval),
                        plain(kw, ts, t, u),
                        "{} ts={ts} t={t} u={u}",
                        kw.name()
                    );
                }
            }
        }
    }
}

#[test]
fn misspelled_until_is_accepted() {
    assert_eq!(resolve_time_keyword("untill").unwrap(), resolve_time_keyword("until").unwrap());
    assert!(resolve_time_keyword("sometime").is_err());
}

#[test]
fn keywords_in_queries_match_the_grid() {
    let mut g = TpmGraph::new();
    for ts in 1..10 {
        g.add_node(NodeRecord::event("tick", Timestamp(ts))).unwrap();
    }
    let mut engine = Engine::new(g);
    for kw in TimeKeyword::ALL {
        for t in 1..10 {
            let args = if kw == TimeKeyword::Between { format!("t{t}, t{}", t + 2) } else { format!("t{t}") };
            let q = format!(
                "select ?ts where {{ ?x @type event. ?x @timestamp ?ts. filter(Timesemantic(?ts, {} {args})). }}",
                kw.name()
            );
            let Outcome::Rows(rows) = engine.execute_str(&q, Timestamp(10)).unwrap() else { panic!() };
            let got: Vec<String> = rows.rows.iter().map(|r| r[0].to_string()).collect();
            let want: Vec<String> = (1..10)
                .filter(|&ts| plain(kw, ts, t, t + 2))
                .map(|ts| format!("t{ts}"))
                .collect();
            assert_eq!(got, want, "{q}");
        }
    }
}
