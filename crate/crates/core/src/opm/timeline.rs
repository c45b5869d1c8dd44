//! Instance-level reading of an annotated OPM graph.
//!
//! Works out, for every entity, the instants at which it takes part in an
//! interaction, and for every OPM edge the pair of instances it connects.
//! Validation reports the issues found here; conversion builds the TPM
//! graph from the same plan, so the two can never disagree.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::validate::{Issue, IssueKind, Severity};
use super::{opm_endpoints, OpmGraph, OpmKind};
use crate::model::{Relation, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceRef {
    pub entity: String,
    pub at: Timestamp,
}

impl InstanceRef {
    fn new(entity: &str, at: Timestamp) -> Self {
        InstanceRef {
            entity: entity.to_owned(),
            at,
        }
    }

    /// Node id used for this instance in the TPM graph.
    pub fn node_id(&self) -> String {
        format!("{}@{}", self.entity, self.at.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedEdge {
    /// Index of the OPM edge this link comes from.
    pub edge: usize,
    pub from: InstanceRef,
    pub relation: Relation,
    pub to: InstanceRef,
}

#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub artifacts: BTreeMap<String, BTreeSet<Timestamp>>,
    pub agents: BTreeMap<String, BTreeSet<Timestamp>>,
    pub processes: BTreeMap<String, BTreeSet<Timestamp>>,
    /// Process-instance label → member processes.
    pub groups: BTreeMap<String, Vec<String>>,
    pub links: Vec<PlannedEdge>,
    pub issues: Vec<Issue>,
}

impl Plan {
    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }
}

/// Grouping label of a process: its `process_instance` attribute, else its id.
pub fn group_of(opm: &OpmGraph, process: &str) -> String {
    opm.node(process)
        .and_then(|n| n.attributes.get("process_instance"))
        .cloned()
        .unwrap_or_else(|| process.to_owned())
}

struct Planner<'a> {
    opm: &'a OpmGraph,
    plan: Plan,
}

impl Planner<'_> {
    fn issue(&mut self, severity: Severity, kind: IssueKind, edge: Option<usize>, message: String) {
        self.plan.issues.push(Issue {
            severity,
            kind,
            edge,
            message,
        });
    }
}

pub fn plan(opm: &OpmGraph) -> Plan {
    let mut p = Planner {
        opm,
        plan: Plan::default(),
    };
    let usable = structural_checks(&mut p);
    let edges = &opm.edges;
    let of = |rel: Relation| usable.iter().copied().filter(move |&i| edges[i].relation == rel);

    let global_min = edges
        .iter()
        .flat_map(|e| [e.time, e.source_time])
        .flatten()
        .min()
        .unwrap_or(Timestamp(0));

    // The process taking part in an edge, for the relations where it has one.
    let process_side = |i: usize| -> Option<&str> {
        let e = &edges[i];
        match e.relation {
            Relation::Used | Relation::WasControlledBy | Relation::WasTriggeredBy => Some(&e.from),
            Relation::WasGeneratedBy => Some(&e.to),
            Relation::WasDerivedFrom => None,
            _ => None,
        }
    };
    let mut anchor: BTreeMap<&str, Timestamp> = BTreeMap::new();
    for &i in &usable {
        if let (Some(proc_id), Some(t)) = (process_side(i), edges[i].time) {
            anchor
                .entry(proc_id)
                .and_modify(|a| *a = (*a).min(t))
                .or_insert(t);
        }
    }
    for n in opm.nodes.iter().filter(|n| n.kind == OpmKind::Process) {
        let touched = usable.iter().any(|&i| process_side(i) == Some(n.id.as_str()));
        if !touched {
            p.issue(
                Severity::Warning,
                IssueKind::IdleEntity,
                None,
                format!("process `{}` has no interactions; no event is created", n.id),
            );
        } else if !anchor.contains_key(n.id.as_str()) {
            p.issue(
                Severity::Warning,
                IssueKind::MissingAnnotation,
                None,
                format!(
                    "process `{}` has no time annotation; its interactions are placed at {global_min}",
                    n.id
                ),
            );
        }
    }
    let anchor_of = |proc_id: &str| anchor.get(proc_id).copied().unwrap_or(global_min);

    let mut effective: HashMap<usize, Timestamp> = HashMap::new();
    for &i in &usable {
        let e = &edges[i];
        if e.relation == Relation::WasDerivedFrom || e.relation == Relation::WasTriggeredBy {
            continue;
        }
        let proc_id = process_side(i).expect("used/generated/controlled edges involve a process");
        let t = match e.time {
            Some(t) => t,
            None => {
                let t = anchor_of(proc_id);
                p.issue(
                    Severity::Warning,
                    IssueKind::MissingAnnotation,
                    Some(i),
                    format!("edge `{e}` has no time annotation; using {t}"),
                );
                t
            }
        };
        effective.insert(i, t);
        p.plan.processes.entry(proc_id.to_owned()).or_default().insert(t);
    }

    // Triggered side first, so every trigger source sees the final event set.
    let mut trigger_at: HashMap<usize, Timestamp> = HashMap::new();
    for i in of(Relation::WasTriggeredBy) {
        let e = &edges[i];
        let t = e.time.unwrap_or_else(|| {
            p.plan
                .processes
                .get(&e.from)
                .and_then(|s| s.iter().next().copied())
                .unwrap_or_else(|| anchor_of(&e.from))
        });
        trigger_at.insert(i, t);
        p.plan.processes.entry(e.from.clone()).or_default().insert(t);
    }
    let mut triggers = Vec::new();
    for i in of(Relation::WasTriggeredBy) {
        let e = &edges[i];
        let tp = trigger_at[&i];
        let source_times = p.plan.processes.get(&e.to).cloned().unwrap_or_default();
        let tq = match source_times.range(..tp).next_back() {
            Some(t) => *t,
            None => {
                let t = source_times.iter().next().copied().unwrap_or_else(|| anchor_of(&e.to));
                p.plan.processes.entry(e.to.clone()).or_default().insert(t);
                p.issue(
                    Severity::Warning,
                    IssueKind::MissingAnnotation,
                    Some(i),
                    format!("`{e}`: `{}` has no event before {tp}; linking earliest events", e.to),
                );
                t
            }
        };
        if tq >= tp {
            p.issue(
                Severity::Error,
                IssueKind::TemporalInconsistency,
                Some(i),
                format!("`{e}`: triggering event at {tq} is not earlier than the triggered one at {tp}"),
            );
            continue;
        }
        triggers.push(PlannedEdge {
            edge: i,
            from: InstanceRef::new(&e.from, tp),
            relation: Relation::WasTriggeredBy,
            to: InstanceRef::new(&e.to, tq),
        });
    }

    // A process that reads and rewrites one artifact at one instant reads
    // the previous version.
    let generated: BTreeSet<(&str, &str, Timestamp)> = of(Relation::WasGeneratedBy)
        .map(|i| (edges[i].from.as_str(), edges[i].to.as_str(), effective[&i]))
        .collect();
    let rewrites: BTreeSet<usize> = of(Relation::Used)
        .filter(|&i| generated.contains(&(edges[i].to.as_str(), edges[i].from.as_str(), effective[&i])))
        .collect();
    for i in of(Relation::Used).filter(|i| !rewrites.contains(i)) {
        p.plan.artifacts.entry(edges[i].to.clone()).or_default().insert(effective[&i]);
    }
    for i in of(Relation::WasGeneratedBy) {
        p.plan.artifacts.entry(edges[i].from.clone()).or_default().insert(effective[&i]);
    }
    for i in of(Relation::WasDerivedFrom) {
        let e = &edges[i];
        if let Some(t) = e.time {
            p.plan.artifacts.entry(e.from.clone()).or_default().insert(t);
        }
        if let Some(t) = e.source_time {
            p.plan.artifacts.entry(e.to.clone()).or_default().insert(t);
        }
    }
    let mut reads = Vec::new();
    for &i in &rewrites {
        let e = &edges[i];
        let t = effective[&i];
        match p.plan.artifacts.get(&e.to).and_then(|s| s.range(..t).next_back()) {
            Some(prev) => reads.push((i, *prev)),
            None => p.issue(
                Severity::Error,
                IssueKind::TemporalInconsistency,
                Some(i),
                format!("`{e}`: `{}` is generated by the same process at {t} and has no earlier version to read", e.to),
            ),
        }
    }
    let mut derivations = Vec::new();
    for i in of(Relation::WasDerivedFrom) {
        let e = &edges[i];
        let derived = match e.time {
            Some(t) => Some(t),
            None => {
                let latest = p.plan.artifacts.get(&e.from).and_then(|s| s.iter().next_back().copied());
                if let Some(t) = latest {
                    p.issue(
                        Severity::Warning,
                        IssueKind::MissingAnnotation,
                        Some(i),
                        format!("`{e}` has no time annotation; deriving the instance at {t}"),
                    );
                }
                latest
            }
        };
        let Some(td) = derived else {
            p.issue(
                Severity::Error,
                IssueKind::TemporalInconsistency,
                Some(i),
                format!("`{e}`: `{}` has no instance to derive", e.from),
            );
            continue;
        };
        let source = match e.source_time {
            Some(t) => Some(t),
            None => p
                .plan
                .artifacts
                .get(&e.to)
                .and_then(|s| s.range(..td).next_back().copied()),
        };
        match source {
            Some(ts) if ts < td => derivations.push(PlannedEdge {
                edge: i,
                from: InstanceRef::new(&e.from, td),
                relation: Relation::WasDerivedFrom,
                to: InstanceRef::new(&e.to, ts),
            }),
            Some(ts) => p.issue(
                Severity::Error,
                IssueKind::TemporalInconsistency,
                Some(i),
                format!("`{e}`: derived instance at {td} is not later than its source at {ts}"),
            ),
            None => p.issue(
                Severity::Error,
                IssueKind::TemporalInconsistency,
                Some(i),
                format!("`{e}`: `{}` has no instance before {td}", e.to),
            ),
        }
    }
    for i in of(Relation::WasControlledBy) {
        p.plan.agents.entry(edges[i].to.clone()).or_default().insert(effective[&i]);
    }
    for n in &opm.nodes {
        let instances = match n.kind {
            OpmKind::Artifact => &p.plan.artifacts,
            OpmKind::Agent => &p.plan.agents,
            OpmKind::Process => continue,
        };
        if !instances.contains_key(&n.id) {
            let msg = format!("{} `{}` takes part in no interaction; no instance is created", n.kind, n.id);
            p.issue(Severity::Warning, IssueKind::IdleEntity, None, msg);
        }
    }

    check_ties(&mut p, &usable, &effective);

    let mut links = Vec::new();
    let read_at: HashMap<usize, Timestamp> = reads.into_iter().collect();
    for &i in &usable {
        let e = &edges[i];
        let link = |from: InstanceRef, to: InstanceRef| PlannedEdge {
            edge: i,
            from,
            relation: e.relation,
            to,
        };
        match e.relation {
            Relation::Used => {
                let t = effective[&i];
                if rewrites.contains(&i) {
                    if let Some(prev) = read_at.get(&i) {
                        links.push(link(InstanceRef::new(&e.from, t), InstanceRef::new(&e.to, *prev)));
                    }
                } else {
                    links.push(link(InstanceRef::new(&e.from, t), InstanceRef::new(&e.to, t)));
                }
            }
            Relation::WasGeneratedBy | Relation::WasControlledBy => {
                let t = effective[&i];
                links.push(link(InstanceRef::new(&e.from, t), InstanceRef::new(&e.to, t)));
            }
            _ => {}
        }
    }
    links.extend(triggers);
    links.extend(derivations);
    links.sort_by_key(|l| l.edge);

    let mut seen: BTreeMap<(&InstanceRef, Relation, &InstanceRef), usize> = BTreeMap::new();
    let mut duplicates = BTreeSet::new();
    for (k, l) in links.iter().enumerate() {
        if let Some(first) = seen.insert((&l.from, l.relation, &l.to), l.edge) {
            duplicates.insert(k);
            let msg = format!(
                "edge `{}` maps onto the same instance edge as edge `{}`",
                edges[l.edge], edges[first]
            );
            p.plan.issues.push(Issue {
                severity: Severity::Error,
                kind: IssueKind::DuplicateInstanceEdge,
                edge: Some(l.edge),
                message: msg,
            });
        }
    }
    let links: Vec<PlannedEdge> = links
        .into_iter()
        .enumerate()
        .filter(|(k, _)| !duplicates.contains(k))
        .map(|(_, l)| l)
        .collect();

    if let Some(l) = instance_cycle(&links) {
        let msg = format!(
            "instance edge {} -{}-> {} lies on a causality cycle",
            l.from.node_id(),
            l.relation,
            l.to.node_id()
        );
        p.issue(Severity::Error, IssueKind::CausalityCycle, Some(l.edge), msg);
    }
    if let Some(i) = entity_cycle(opm, &usable) {
        let msg = format!(
            "`{}` closes a cycle between entities; the time annotations keep the instances acyclic",
            edges[i]
        );
        p.issue(Severity::Warning, IssueKind::ShiftingGranularityCycle, Some(i), msg);
    }

    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for proc_id in p.plan.processes.keys() {
        groups.entry(group_of(opm, proc_id)).or_default().push(proc_id.clone());
    }
    p.plan.groups = groups;
    p.plan.links = links;
    p.plan
}

/// Dangling endpoints and kind mismatches; returns the edges that pass.
fn structural_checks(p: &mut Planner<'_>) -> Vec<usize> {
    let mut usable = Vec::new();
    for (i, e) in p.opm.edges.iter().enumerate() {
        let (want_from, want_to) = opm_endpoints(e.relation).expect("parser admits OPM relations only");
        let (from, to) = (p.opm.node(&e.from), p.opm.node(&e.to));
        let missing: Vec<&str> = [(&e.from, from), (&e.to, to)]
            .into_iter()
            .filter(|(_, n)| n.is_none())
            .map(|(id, _)| id.as_str())
            .collect();
        if !missing.is_empty() {
            let msg = format!("edge `{e}` refers to unknown node(s) {}", missing.join(", "));
            p.issue(Severity::Error, IssueKind::DanglingEndpoint, Some(i), msg);
            continue;
        }
        let (from, to) = (from.unwrap(), to.unwrap());
        if from.kind != want_from || to.kind != want_to {
            let msg = format!(
                "`{}` goes {want_from} -> {want_to}, found {} -> {}",
                e.relation, from.kind, to.kind
            );
            p.issue(Severity::Error, IssueKind::IllegalRelation, Some(i), msg);
            continue;
        }
        usable.push(i);
    }
    usable
}

fn check_ties(p: &mut Planner<'_>, usable: &[usize], effective: &HashMap<usize, Timestamp>) {
    let edges = &p.opm.edges;
    let mut controllers: BTreeMap<(&str, Timestamp), BTreeSet<&str>> = BTreeMap::new();
    let mut generators: BTreeMap<(&str, Timestamp), BTreeSet<&str>> = BTreeMap::new();
    for &i in usable {
        let e = &edges[i];
        match e.relation {
            Relation::WasControlledBy => {
                controllers.entry((&e.to, effective[&i])).or_default().insert(&e.from);
            }
            Relation::WasGeneratedBy => {
                generators.entry((&e.from, effective[&i])).or_default().insert(&e.to);
            }
            _ => {}
        }
    }
    let mut found = Vec::new();
    for ((agent, t), procs) in &controllers {
        if procs.len() > 1 {
            found.push(format!(
                "agent `{agent}` controls {} processes at {t}",
                procs.iter().copied().collect::<Vec<_>>().join(", ")
            ));
        }
    }
    for ((artifact, t), procs) in &generators {
        if procs.len() > 1 {
            found.push(format!(
                "artifact `{artifact}` is generated by {} processes at {t}",
                procs.len()
            ));
        }
    }
    let mut group_times: BTreeMap<(String, Timestamp), Vec<&str>> = BTreeMap::new();
    for (proc_id, times) in &p.plan.processes {
        for t in times {
            group_times
                .entry((group_of(p.opm, proc_id), *t))
                .or_default()
                .push(proc_id);
        }
    }
    for ((group, t), procs) in &group_times {
        if procs.len() > 1 {
            found.push(format!(
                "processes {} of instance `{group}` both act at {t}",
                procs.join(", ")
            ));
        }
    }
    for msg in found {
        p.issue(Severity::Error, IssueKind::InstantTie, None, msg);
    }
}

fn instance_cycle(links: &[PlannedEdge]) -> Option<&PlannedEdge> {
    let mut out: BTreeMap<&InstanceRef, Vec<&PlannedEdge>> = BTreeMap::new();
    for l in links {
        out.entry(&l.from).or_default().push(l);
    }
    let starts: Vec<&InstanceRef> = out.keys().copied().collect();
    find_cycle(&starts, |n| out.get(n).map(|v| v.iter().map(|l| (&l.to, *l)).collect()).unwrap_or_default())
}

fn entity_cycle(opm: &OpmGraph, usable: &[usize]) -> Option<usize> {
    let mut out: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for &i in usable {
        let e = &opm.edges[i];
        out.entry(&e.from).or_default().push((&e.to, i));
    }
    let starts: Vec<&str> = out.keys().copied().collect();
    find_cycle(&starts, |n| out.get(n).cloned().unwrap_or_default())
}

/// Iterative three-colour DFS; returns the label of the first back edge.
fn find_cycle<N, L, F>(starts: &[N], next: F) -> Option<L>
where
    N: Ord + Copy,
    F: Fn(&N) -> Vec<(N, L)>,
{
    let mut state: BTreeMap<N, bool> = BTreeMap::new(); // true = on stack
    for &root in starts {
        if state.contains_key(&root) {
            continue;
        }
        state.insert(root, true);
        let mut stack = vec![(root, next(&root), 0usize)];
        while let Some((node, succ, pos)) = stack.last_mut() {
            if *pos < succ.len() {
                let (target, _) = &succ[*pos];
                let target = *target;
                let k = *pos;
                *pos += 1;
                match state.get(&target) {
                    Some(true) => {
                        let (_, label) = succ.swap_remove(k);
                        return Some(label);
                    }
                    Some(false) => {}
                    None => {
                        state.insert(target, true);
                        let s = next(&target);
                        stack.push((target, s, 0));
                    }
                }
            } else {
                state.insert(*node, false);
                stack.pop();
            }
        }
    }
    None
}
