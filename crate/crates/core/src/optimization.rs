//! Selection of one candidate under schedule and technology constraints,
//! and packing of its feasible members into development increments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::CapabilitySet;
use crate::graph::FdGraph;
use crate::ids::NodeId;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("no candidate has a member satisfying the constraints")]
    NoFeasibleSelection,
    #[error("capability `{member}` needs {effort} effort units, more than the budget of {budget}")]
    MemberExceedsBudget { member: NodeId, effort: f64, budget: f64 },
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
    #[error("candidate was scored against a different graph")]
    GraphMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Constraints {
    /// Effort units available per increment. Zero means unlimited.
    pub schedule_budget: f64,
    /// Minimum technology readiness level every directive must reach.
    pub min_tech_readiness: u8,
}

impl Default for Constraints {
    fn default() -> Self {
        Self::unbounded()
    }
}

impl Constraints {
    pub fn new(schedule_budget: f64, min_tech_readiness: u8) -> Result<Self, OptimizeError> {
        let c = Self {
            schedule_budget,
            min_tech_readiness,
        };
        c.check()?;
        Ok(c)
    }

    /// No schedule limit and the lowest readiness threshold.
    pub fn unbounded() -> Self {
        Self {
            schedule_budget: 0.0,
            min_tech_readiness: 1,
        }
    }

    pub fn check(&self) -> Result<(), OptimizeError> {
        if !(self.schedule_budget.is_finite() && self.schedule_budget >= 0.0) {
            return Err(OptimizeError::InvalidConstraints(format!(
                "schedule budget {} must be finite and >= 0",
                self.schedule_budget
            )));
        }
        if !(1..=9).contains(&self.min_tech_readiness) {
            return Err(OptimizeError::InvalidConstraints(format!(
                "minimum tech readiness {} outside 1..=9",
                self.min_tech_readiness
            )));
        }
        Ok(())
    }

    fn budget(&self) -> Option<f64> {
        (self.schedule_budget > 0.0).then_some(self.schedule_budget)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "status")]
pub enum Feasibility {
    Feasible,
    /// Directives below the readiness threshold.
    Deferred { reasons: Vec<NodeId> },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeferredSlot {
    #[serde(rename = "deferred")]
    Deferred,
}

/// Position of an increment in the plan. Deferred members sit after every
/// planned increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IncrementIndex {
    Planned(u32),
    Deferred(DeferredSlot),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Increment {
    pub index: IncrementIndex,
    pub members: Vec<NodeId>,
    pub total_effort: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizedSelection {
    pub chosen_set: CapabilitySet,
    pub feasibility: BTreeMap<NodeId, Feasibility>,
    pub increment_plan: Vec<Increment>,
}

impl OptimizedSelection {
    pub fn is_feasible(&self, member: &str) -> bool {
        self.feasibility.get(member).is_some_and(Feasibility::is_feasible)
    }

    /// Chosen members that own `directive`.
    pub fn owners_of<'a>(&'a self, directive: &'a str) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.chosen_set.owners_of(directive)
    }
}

/// Per-member verdict: feasible iff every owned directive reaches the
/// readiness threshold.
pub fn feasibility(graph: &FdGraph, set: &CapabilitySet, constraints: &Constraints) -> BTreeMap<NodeId, Feasibility> {
    set.assignment
        .iter()
        .map(|(member, directives)| {
            let reasons: Vec<NodeId> = directives
                .iter()
                .filter(|d| {
                    graph
                        .directive(d.as_str())
                        .is_some_and(|p| p.tech_readiness < constraints.min_tech_readiness)
                })
                .cloned()
                .collect();
            let verdict = if reasons.is_empty() {
                Feasibility::Feasible
            } else {
                Feasibility::Deferred { reasons }
            };
            (member.clone(), verdict)
        })
        .collect()
}

/// Sum of the efforts of a member's directives.
pub fn member_effort(graph: &FdGraph, set: &CapabilitySet, member: &str) -> f64 {
    set.assignment
        .get(member)
        .into_iter()
        .flatten()
        .filter_map(|d| graph.directive(d.as_str()))
        .map(|d| d.effort)
        .sum()
}

/// Plans one candidate: feasibility verdicts plus first-fit-decreasing
/// packing of the feasible members.
pub fn plan(graph: &FdGraph, set: &CapabilitySet, constraints: &Constraints) -> Result<OptimizedSelection, OptimizeError> {
    constraints.check()?;
    if set.graph != graph.fingerprint() {
        return Err(OptimizeError::GraphMismatch);
    }
    let verdicts = feasibility(graph, set, constraints);
    let mut feasible: Vec<(NodeId, f64)> = verdicts
        .iter()
        .filter(|(_, v)| v.is_feasible())
        .map(|(m, _)| (m.clone(), member_effort(graph, set, m.as_str())))
        .collect();
    if feasible.is_empty() {
        return Err(OptimizeError::NoFeasibleSelection);
    }
    if let Some(budget) = constraints.budget() {
        if let Some((member, effort)) = feasible.iter().find(|(_, e)| *e > budget) {
            return Err(OptimizeError::MemberExceedsBudget {
                member: member.clone(),
                effort: *effort,
                budget,
            });
        }
    }

    feasible.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut bins: Vec<(Vec<NodeId>, f64)> = Vec::new();
    for (member, effort) in feasible {
        let slot = match constraints.budget() {
            Some(budget) => bins.iter().position(|(_, load)| load + effort <= budget),
            None => (!bins.is_empty()).then_some(0),
        };
        match slot {
            Some(i) => {
                bins[i].0.push(member);
                bins[i].1 += effort;
            }
            None => bins.push((vec![member], effort)),
        }
    }

    let mut increment_plan: Vec<Increment> = bins
        .into_iter()
        .enumerate()
        .map(|(i, (mut members, _))| {
            members.sort();
            let total_effort = members.iter().map(|m| member_effort(graph, set, m.as_str())).sum();
            Increment {
                index: IncrementIndex::Planned(i as u32 + 1),
                members,
                total_effort,
            }
        })
        .collect();
    let deferred: Vec<NodeId> = verdicts
        .iter()
        .filter(|(_, v)| !v.is_feasible())
        .map(|(m, _)| m.clone())
        .collect();
    if !deferred.is_empty() {
        let total_effort = deferred.iter().map(|m| member_effort(graph, set, m.as_str())).sum();
        increment_plan.push(Increment {
            index: IncrementIndex::Deferred(DeferredSlot::Deferred),
            members: deferred,
            total_effort,
        });
    }

    Ok(OptimizedSelection {
        chosen_set: set.clone(),
        feasibility: verdicts,
        increment_plan,
    })
}

/// Chooses the highest-ranked candidate with at least one feasible member
/// and plans it.
pub fn optimize(graph: &FdGraph, ranked: &[CapabilitySet], constraints: &Constraints) -> Result<OptimizedSelection, OptimizeError> {
    constraints.check()?;
    if ranked.is_empty() {
        return Err(OptimizeError::NoCandidates);
    }
    let chosen = ranked
        .iter()
        .find(|c| feasibility(graph, c, constraints).values().any(Feasibility::is_feasible))
        .ok_or(OptimizeError::NoFeasibleSelection)?;
    plan(graph, chosen, constraints)
}
