//! Timed folder/path nodes: agents that keep them current.
//!
//! A pull agent re-runs its container's defining query every `interval`
//! ticks. A push agent re-runs it when a change touches a node it watches,
//! or adds a node that could bind one of the query's variables.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::eval::EvalError;
use crate::model::Timestamp;
use crate::query::{Predicate, Statement, Term};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionDelta {
    pub at: Timestamp,
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

impl EvolutionDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }

    pub fn between(at: Timestamp, old: &BTreeSet<String>, new: &BTreeSet<String>) -> Self {
        EvolutionDelta {
            at,
            added: new.difference(old).cloned().collect(),
            removed: old.difference(new).cloned().collect(),
        }
    }

    /// `delta <agent> <t> +id.. -id..`
    pub fn log_line(&self, agent: &str) -> String {
        let mut line = format!("delta {agent} {}", self.at.0);
        for id in &self.added {
            let _ = write!(line, " +{id}");
        }
        for id in &self.removed {
            let _ = write!(line, " -{id}");
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentMode {
    Pull { interval: u64 },
    Push { watched: BTreeSet<String> },
}

impl AgentMode {
    pub fn pull(interval: u64) -> Self {
        AgentMode::Pull { interval }
    }

    pub fn push() -> Self {
        AgentMode::Push {
            watched: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRegistration {
    pub agent_id: String,
    pub target: String,
    pub mode: AgentMode,
    pub last_run: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("`{0}` is not a timed folder or path node")]
    NotTimed(String),
    #[error("`{0}` already has an agent")]
    DuplicateRegistration(String),
    #[error("pull interval must be positive")]
    ZeroInterval,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub fn agent_id(target: &str) -> String {
    format!("agent:{target}")
}

/// Delta produced by one agent run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRun {
    pub agent_id: String,
    pub target: String,
    pub delta: EvolutionDelta,
}

impl Engine {
    pub fn agents(&self) -> impl Iterator<Item = &AgentRegistration> {
        self.agents.values()
    }

    pub fn register(&mut self, target: &str, mode: AgentMode) -> Result<&AgentRegistration, AgentError> {
        let node = self
            .catalog
            .get(target)
            .ok_or_else(|| EvalError::UnknownContainer(target.to_owned()))?;
        if !node.timed {
            return Err(AgentError::NotTimed(target.to_owned()));
        }
        if matches!(mode, AgentMode::Pull { interval: 0 }) {
            return Err(AgentError::ZeroInterval);
        }
        let id = agent_id(target);
        if self.agents.contains_key(&id) {
            return Err(AgentError::DuplicateRegistration(target.to_owned()));
        }
        let mode = match mode {
            AgentMode::Push { .. } => AgentMode::Push {
                watched: node.watched.clone(),
            },
            pull => pull,
        };
        let reg = AgentRegistration {
            agent_id: id.clone(),
            target: target.to_owned(),
            mode,
            last_run: node.created_at,
        };
        Ok(self.agents.entry(id).or_insert(reg))
    }

    pub fn unregister(&mut self, target: &str) -> Option<AgentRegistration> {
        self.agents.remove(&agent_id(target))
    }

    /// Run every pull agent whose interval has elapsed.
    pub fn tick(&mut self, now: Timestamp) -> Vec<AgentRun> {
        let due: Vec<String> = self
            .agents
            .values()
            .filter(|a| match a.mode {
                AgentMode::Pull { interval } => now.0 >= a.last_run.0 + interval,
                AgentMode::Push { .. } => false,
            })
            .map(|a| a.agent_id.clone())
            .collect();
        due.into_iter().filter_map(|id| self.run_agent(&id, now)).collect()
    }

    /// Run every push agent the change concerns. `changed` lists added,
    /// removed or modified node ids, and both endpoints of added edges.
    pub fn notify_change(&mut self, changed: &BTreeSet<String>, now: Timestamp) -> Vec<AgentRun> {
        let due: Vec<String> = self
            .agents
            .values()
            .filter(|a| match &a.mode {
                AgentMode::Push { watched } => changed
                    .iter()
                    .any(|id| watched.contains(id) || self.could_bind(&a.target, id)),
                AgentMode::Pull { .. } => false,
            })
            .map(|a| a.agent_id.clone())
            .collect();
        due.into_iter().filter_map(|id| self.run_agent(&id, now)).collect()
    }

    fn run_agent(&mut self, id: &str, now: Timestamp) -> Option<AgentRun> {
        let target = self.agents.get(id)?.target.clone();
        match self.refresh(&target, now) {
            Ok(delta) => {
                let watched = self.catalog.get(&target).map(|m| m.watched.clone()).unwrap_or_default();
                let agent = self.agents.get_mut(id)?;
                agent.last_run = now;
                if let AgentMode::Push { watched: w } = &mut agent.mode {
                    *w = watched;
                }
                Some(AgentRun {
                    agent_id: id.to_owned(),
                    target,
                    delta,
                })
            }
            Err(e) => {
                self.failures.push(format!("{id} at t{}: {e}", now.0));
                None
            }
        }
    }

    /// Whether node `id` satisfies every constant attribute pattern of at
    /// least one variable of the target's defining query.
    fn could_bind(&self, target: &str, id: &str) -> bool {
        let (Some(m), Some(ix)) = (self.catalog.get(target), self.graph.index_of(id)) else {
            return false;
        };
        let (body, own) = match &m.defining_query {
            Statement::Fconstruct(f) => (&f.body, &f.var),
            Statement::Pconstruct(p) => {
                let node = self.graph.node(ix);
                let named = [&p.start, &p.end].into_iter().flatten().any(|t| match t {
                    Term::Const(c) => {
                        let c = crate::eval::Val::from(c.clone()).to_string();
                        c == node.id || c == node.entity.as_str()
                    }
                    Term::Var(_) => false,
                });
                if named {
                    return true;
                }
                (&p.body, &p.var)
            }
            _ => return false,
        };
        let vars: BTreeSet<&str> = body.pattern_vars().into_iter().filter(|v| v != own).collect();
        if vars.is_empty() {
            return false;
        }
        vars.into_iter().any(|v| {
            body.patterns.iter().all(|p| match (&p.subject, &p.predicate, &p.object) {
                (Term::Var(s), Predicate::Attr(a), Term::Const(c)) if s == v => {
                    crate::eval::node_attribute(&self.graph, ix, a)
                        .is_some_and(|val| val.matches(&c.clone().into()))
                }
                _ => true,
            })
        })
    }

    /// Membership of `target` at time `t`, replayed from its evolution log.
    /// Members already present when the node was constructed count from
    /// their own timestamps, so history loaded in one go still evolves.
    pub fn evolution_at(&self, target: &str, t: Timestamp) -> Result<BTreeSet<String>, EvalError> {
        let m = self
            .catalog
            .get(target)
            .ok_or_else(|| EvalError::UnknownContainer(target.to_owned()))?;
        let mut members = BTreeSet::new();
        if let Some(first) = m.evolution_log.first().filter(|d| d.at > t) {
            members.extend(
                first
                    .added
                    .iter()
                    .filter(|id| self.graph.node_by_id(id).is_some_and(|n| n.span().1 <= t))
                    .cloned(),
            );
        }
        for delta in m.evolution_log.iter().filter(|d| d.at <= t) {
            for id in &delta.removed {
                members.remove(id);
            }
            members.extend(delta.added.iter().cloned());
        }
        Ok(members)
    }

    /// Each stored path of a path node, keeping only nodes stamped at or
    /// before `t`.
    pub fn truncated_paths_at(&self, target: &str, t: Timestamp) -> Result<Vec<Vec<String>>, EvalError> {
        let m = self
            .catalog
            .get(target)
            .ok_or_else(|| EvalError::UnknownContainer(target.to_owned()))?;
        Ok(m.paths
            .iter()
            .map(|p| {
                p.nodes
                    .iter()
                    .filter(|id| self.graph.node_by_id(id).is_some_and(|n| n.span().1 <= t))
                    .cloned()
                    .collect()
            })
            .collect())
    }

    /// Evolution log of every agent-backed container, ordered by time.
    pub fn export_log(&self) -> String {
        let mut lines: Vec<(Timestamp, String, String)> = Vec::new();
        for agent in self.agents.values() {
            if let Some(m) = self.catalog.get(&agent.target) {
                for d in &m.evolution_log {
                    lines.push((d.at, agent.agent_id.clone(), d.log_line(&agent.agent_id)));
                }
            }
        }
        lines.sort();
        let mut out = String::new();
        for (_, _, line) in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Errors raised by agent runs, oldest first.
    pub fn failures(&self) -> &[String] {
        &self.failures
    }
}
