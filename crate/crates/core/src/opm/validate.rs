use std::fmt;

use super::timeline;
use super::OpmGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum IssueKind {
    DanglingEndpoint,
    IllegalRelation,
    CausalityCycle,
    TemporalInconsistency,
    DuplicateInstanceEdge,
    InstantTie,
    MissingAnnotation,
    IdleEntity,
    ShiftingGranularityCycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    /// Index into `OpmGraph::edges`, when the issue concerns one edge.
    pub edge: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}: {:?}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    /// No error-level issues; warnings are allowed.
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn validate_opm(graph: &OpmGraph) -> ValidationReport {
    ValidationReport {
        issues: timeline::plan(graph).issues,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Relation;
    use crate::opm::{parse_opm, OpmEdge, OpmKind, OpmNode};

    fn graph(src: &str) -> OpmGraph {
        parse_opm(src).unwrap()
    }

    #[test]
    fn reversed_used_is_illegal() {
        let g = graph("node A artifact\nnode P process\nedge A used P t=1\n");
        let report = validate_opm(&g);
        assert!(report.has(IssueKind::IllegalRelation));
        assert!(!report.is_valid());
    }

    #[test]
    fn equal_derivation_annotations_are_inconsistent() {
        let g = graph(
            "node A artifact\nnode B artifact\nnode P process\n\
             edge A wasGeneratedBy P t=2\nedge A wasDerivedFrom B t=2 src_t=2\n",
        );
        let report = validate_opm(&g);
        assert!(report.has(IssueKind::TemporalInconsistency));
    }

    #[test]
    fn dangling_endpoint_reported() {
        let report = validate_opm(&graph("node P process\nedge P used Ghost t=1\n"));
        assert_eq!(report.errors().count(), 1);
        assert!(report.has(IssueKind::DanglingEndpoint));
    }

    #[test]
    fn unannotated_edges_are_flagged_not_rejected() {
        let report = validate_opm(&graph(
            "node A artifact\nnode P process\nnode Q process\n\
             edge P used A t=4\nedge A wasGeneratedBy Q\n",
        ));
        assert!(report.is_valid());
        assert!(report.has(IssueKind::MissingAnnotation));
    }

    #[test]
    fn update_cycle_is_a_warning() {
        let mut g = OpmGraph::new();
        g.add_node(OpmNode::new("A", OpmKind::Artifact));
        g.add_node(OpmNode::new("P", OpmKind::Process));
        g.add_node(OpmNode::new("Q", OpmKind::Process));
        g.add_edge(OpmEdge::new("A", Relation::WasGeneratedBy, "Q").at(1));
        g.add_edge(OpmEdge::new("P", Relation::Used, "A").at(3));
        g.add_edge(OpmEdge::new("A", Relation::WasGeneratedBy, "P").at(3));
        let report = validate_opm(&g);
        assert!(report.is_valid(), "{report}");
        assert!(report.has(IssueKind::ShiftingGranularityCycle));
    }

    #[test]
    fn instance_cycle_is_an_error() {
        let report = validate_opm(&graph(
            "node A artifact\nnode B artifact\nnode P process\nnode Q process\n\
             edge P used A t=2\nedge A wasGeneratedBy Q t=2\n\
             edge Q used B t=2\nedge B wasGeneratedBy P t=2\n",
        ));
        assert!(report.has(IssueKind::CausalityCycle));
    }

    #[test]
    fn agent_tie_rejected() {
        let report = validate_opm(&graph(
            "node Ag agent\nnode P process\nnode Q process\n\
             edge P wasControlledBy Ag t=2\nedge Q wasControlledBy Ag t=2\n",
        ));
        assert!(report.has(IssueKind::InstantTie));
    }

    #[test]
    fn duplicate_instance_edge_rejected() {
        let report = validate_opm(&graph(
            "node A artifact\nnode P process\nedge P used A t=2\nedge P used A t=2\n",
        ));
        assert!(report.has(IssueKind::DuplicateInstanceEdge));
    }

    #[test]
    fn trigger_without_earlier_source_falls_back() {
        let report = validate_opm(&graph(
            "node A artifact\nnode B artifact\nnode P process\nnode Q process\n\
             edge P used A t=2\nedge Q used B t=5\nedge P wasTriggeredBy Q\n",
        ));
        // earliest-to-earliest still runs backwards in time
        assert!(report.has(IssueKind::TemporalInconsistency));
    }
}
