//! Candidate Capability sets: enumeration and ranking.
//!
//! A candidate is an antichain of functional nodes whose directive sets
//! together cover every directive in the graph. Members may share
//! directives through intersection edges; the overlap shows up as coupling.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::graph::{FdGraph, GraphError, NodeKind};
use crate::ids::NodeId;
use crate::metrics::{score_at, MetricError, ScoreWeights, SetScore};

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("graph has {internal} internal nodes; exact enumeration is limited to {limit}")]
    GraphTooLargeForExact { internal: usize, limit: usize },
    #[error("more than {limit} candidate sets; raise the limit or use the greedy strategy")]
    CandidateLimitExceeded { limit: usize },
    #[error("graph admits no valid candidate Capability set")]
    NoValidCandidate,
    #[error("candidates were scored against different graphs")]
    MixedGraphCandidates,
    #[error("invalid enumeration limits: {0}")]
    InvalidLimits(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Outcome of checking a node set against the candidate rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "verdict")]
pub enum CandidateCheck {
    Valid,
    Empty,
    NotInternal { node: NodeId },
    NotAntichain { ancestor: NodeId, descendant: NodeId },
    Uncovered { directives: Vec<NodeId> },
}

impl CandidateCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, CandidateCheck::Valid)
    }
}

impl fmt::Display for CandidateCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateCheck::Valid => f.write_str("valid"),
            CandidateCheck::Empty => f.write_str("empty member set"),
            CandidateCheck::NotInternal { node } => write!(f, "`{node}` is not a functional node"),
            CandidateCheck::NotAntichain { ancestor, descendant } => {
                write!(f, "`{ancestor}` is an ancestor of `{descendant}`")
            }
            CandidateCheck::Uncovered { directives } => {
                let ids: Vec<&str> = directives.iter().map(NodeId::as_str).collect();
                write!(f, "directives not covered: {}", ids.join(", "))
            }
        }
    }
}

/// Checks antichain, coverage and membership rules. Unknown ids are errors.
pub fn check_candidate(graph: &FdGraph, nodes: &BTreeSet<NodeId>) -> Result<CandidateCheck, GraphError> {
    if nodes.is_empty() {
        return Ok(CandidateCheck::Empty);
    }
    let mut idxs = Vec::with_capacity(nodes.len());
    for id in nodes {
        let idx = graph
            .index_of(id.as_str())
            .ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        idxs.push(idx);
    }
    for (&idx, id) in idxs.iter().zip(nodes) {
        if graph.node_at(idx).kind != NodeKind::Functional {
            return Ok(CandidateCheck::NotInternal { node: id.clone() });
        }
    }
    for &a in &idxs {
        for &b in &idxs {
            if a != b && graph.descendant_bits_of(a).contains(b) {
                return Ok(CandidateCheck::NotAntichain {
                    ancestor: graph.node_at(a).id.clone(),
                    descendant: graph.node_at(b).id.clone(),
                });
            }
        }
    }
    let mut covered = BitSet::with_capacity(graph.directive_count());
    for &i in &idxs {
        covered.union_with(graph.directive_bits_of(i));
    }
    if covered.count() < graph.directive_count() {
        let missing = (0..graph.directive_count())
            .filter(|&ord| !covered.contains(ord))
            .map(|ord| graph.directive_node_at(ord).id.clone())
            .collect();
        return Ok(CandidateCheck::Uncovered { directives: missing });
    }
    Ok(CandidateCheck::Valid)
}

/// Convenience wrapper returning just the verdict.
pub fn is_valid_candidate(graph: &FdGraph, nodes: &BTreeSet<NodeId>) -> Result<bool, GraphError> {
    check_candidate(graph, nodes).map(|c| c.is_valid())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CapabilitySet {
    pub members: BTreeSet<NodeId>,
    pub score: SetScore,
    /// Member -> the directives it owns.
    pub assignment: BTreeMap<NodeId, BTreeSet<NodeId>>,
    /// Fingerprint of the graph the set was scored against.
    pub graph: String,
}

impl CapabilitySet {
    /// Builds and scores a candidate, rejecting invalid member sets.
    pub fn new(graph: &FdGraph, members: BTreeSet<NodeId>, weights: &ScoreWeights) -> Result<Self, FormulationError> {
        weights.check()?;
        match check_candidate(graph, &members)? {
            CandidateCheck::Valid => {}
            reason => return Err(MetricError::InvalidCandidate(reason).into()),
        }
        let idxs: Vec<usize> = members
            .iter()
            .map(|id| graph.index_of(id.as_str()).expect("checked"))
            .collect();
        Ok(Self::from_indices(graph, &idxs, weights))
    }

    fn from_indices(graph: &FdGraph, idxs: &[usize], weights: &ScoreWeights) -> Self {
        let mut sorted = idxs.to_vec();
        sorted.sort_unstable();
        let assignment = sorted
            .iter()
            .map(|&i| {
                let dirs = graph
                    .directive_bits_of(i)
                    .iter()
                    .map(|ord| graph.directive_node_at(ord).id.clone())
                    .collect();
                (graph.node_at(i).id.clone(), dirs)
            })
            .collect();
        Self {
            members: sorted.iter().map(|&i| graph.node_at(i).id.clone()).collect(),
            score: score_at(graph, &sorted, weights),
            assignment,
            graph: graph.fingerprint().to_owned(),
        }
    }

    /// Members whose assignment contains `directive`.
    pub fn owners_of<'a>(&'a self, directive: &'a str) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.assignment
            .iter()
            .filter(move |(_, dirs)| dirs.contains(directive))
            .map(|(m, _)| m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnumerationLimits {
    pub max_internal_nodes_exact: usize,
    pub max_candidates: usize,
    pub strategy: Strategy,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            max_internal_nodes_exact: 20,
            max_candidates: 10_000,
            strategy: Strategy::Exact,
        }
    }
}

impl EnumerationLimits {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn greedy() -> Self {
        Self {
            strategy: Strategy::Greedy,
            ..Self::default()
        }
    }

    /// Exact when the graph is small enough, greedy otherwise.
    pub fn auto(graph: &FdGraph) -> Self {
        let limits = Self::default();
        if graph.internal_ids().count() <= limits.max_internal_nodes_exact {
            limits
        } else {
            Self::greedy()
        }
    }
}

/// Enumerates candidate Capability sets under `limits`, scoring each with
/// `weights`. The result is in no particular order; see [`rank_candidates`].
pub fn enumerate_candidates(
    graph: &FdGraph,
    limits: &EnumerationLimits,
    weights: &ScoreWeights,
) -> Result<Vec<CapabilitySet>, FormulationError> {
    weights.check()?;
    if limits.max_candidates == 0 || limits.max_internal_nodes_exact == 0 {
        return Err(FormulationError::InvalidLimits("limits must be positive".into()));
    }
    let internal: Vec<usize> = graph
        .internal_ids()
        .map(|id| graph.index_of(id.as_str()).expect("own id"))
        .collect();
    let sets = match limits.strategy {
        Strategy::Exact => {
            if internal.len() > limits.max_internal_nodes_exact {
                return Err(FormulationError::GraphTooLargeForExact {
                    internal: internal.len(),
                    limit: limits.max_internal_nodes_exact,
                });
            }
            let mut search = AntichainSearch::new(graph, &internal, limits.max_candidates);
            search.run()?;
            search.found
        }
        Strategy::Greedy => greedy(graph, &internal, limits.max_candidates, weights)?,
    };
    if sets.is_empty() {
        return Err(FormulationError::NoValidCandidate);
    }
    Ok(sets
        .iter()
        .map(|idxs| CapabilitySet::from_indices(graph, idxs, weights))
        .collect())
}

/// Depth-first include/exclude search over internal nodes, keeping only
/// antichains and pruning branches that can no longer cover every directive.
struct AntichainSearch<'g> {
    graph: &'g FdGraph,
    internal: &'g [usize],
    all: BitSet,
    limit: usize,
    stop_at_first: bool,
    found: Vec<Vec<usize>>,
}

impl<'g> AntichainSearch<'g> {
    fn new(graph: &'g FdGraph, internal: &'g [usize], limit: usize) -> Self {
        let mut all = BitSet::with_capacity(graph.directive_count());
        for ord in 0..graph.directive_count() {
            all.insert(ord);
        }
        Self {
            graph,
            internal,
            all,
            limit,
            stop_at_first: false,
            found: Vec::new(),
        }
    }

    fn run(&mut self) -> Result<(), FormulationError> {
        let mut chosen = Vec::new();
        let covered = BitSet::with_capacity(self.graph.directive_count());
        self.step(0, &mut chosen, &covered)
    }

    fn comparable(&self, a: usize, b: usize) -> bool {
        self.graph.descendant_bits_of(a).contains(b) || self.graph.descendant_bits_of(b).contains(a)
    }

    fn step(&mut self, pos: usize, chosen: &mut Vec<usize>, covered: &BitSet) -> Result<(), FormulationError> {
        if self.stop_at_first && !self.found.is_empty() {
            return Ok(());
        }
        if pos == self.internal.len() {
            if !chosen.is_empty() && covered.is_superset(&self.all) {
                if self.found.len() == self.limit {
                    return Err(FormulationError::CandidateLimitExceeded { limit: self.limit });
                }
                self.found.push(chosen.clone());
            }
            return Ok(());
        }
        let mut reachable = covered.clone();
        for &v in &self.internal[pos..] {
            if chosen.iter().all(|&c| !self.comparable(c, v)) {
                reachable.union_with(self.graph.directive_bits_of(v));
            }
        }
        if !reachable.is_superset(&self.all) {
            return Ok(());
        }
        let v = self.internal[pos];
        if chosen.iter().all(|&c| !self.comparable(c, v)) {
            let mut next = covered.clone();
            next.union_with(self.graph.directive_bits_of(v));
            chosen.push(v);
            self.step(pos + 1, chosen, &next)?;
            chosen.pop();
        }
        self.step(pos + 1, chosen, covered)
    }
}

fn is_valid_indices(graph: &FdGraph, idxs: &[usize]) -> bool {
    let mut covered = BitSet::with_capacity(graph.directive_count());
    for (k, &a) in idxs.iter().enumerate() {
        if graph.node_at(a).kind != NodeKind::Functional {
            return false;
        }
        for &b in &idxs[k + 1..] {
            if a == b || graph.descendant_bits_of(a).contains(b) || graph.descendant_bits_of(b).contains(a) {
                return false;
            }
        }
        covered.union_with(graph.directive_bits_of(a));
    }
    !idxs.is_empty() && covered.count() == graph.directive_count()
}

/// Hill climbing from the mission's functional children: each round replaces
/// the member whose expansion into its functional children most improves the
/// composite, stopping at a fixpoint. Every valid set evaluated is returned.
fn greedy(
    graph: &FdGraph,
    internal: &[usize],
    limit: usize,
    weights: &ScoreWeights,
) -> Result<Vec<Vec<usize>>, FormulationError> {
    let functional_children = |v: usize| -> Vec<usize> {
        graph
            .children_at(v)
            .iter()
            .map(|&(c, _)| c)
            .filter(|&c| graph.node_at(c).kind == NodeKind::Functional)
            .collect()
    };

    let mut start = functional_children(graph.mission_index());
    start.sort_unstable();
    start.dedup();
    if !is_valid_indices(graph, &start) {
        let mut search = AntichainSearch::new(graph, internal, usize::MAX);
        search.stop_at_first = true;
        search.run()?;
        match search.found.pop() {
            Some(first) => start = first,
            None => return Ok(Vec::new()),
        }
    }

    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut visited = vec![start.clone()];
    seen.insert(start.clone());
    let mut current = start;
    let mut current_set = CapabilitySet::from_indices(graph, &current, weights);
    loop {
        let mut best: Option<(Vec<usize>, CapabilitySet)> = None;
        for &member in &current {
            let expansion = functional_children(member);
            if expansion.is_empty() {
                continue;
            }
            let mut next: Vec<usize> = current.iter().copied().filter(|&m| m != member).collect();
            next.extend(expansion);
            next.sort_unstable();
            next.dedup();
            if !is_valid_indices(graph, &next) {
                continue;
            }
            let scored = CapabilitySet::from_indices(graph, &next, weights);
            if seen.insert(next.clone()) {
                if visited.len() == limit {
                    return Ok(visited);
                }
                visited.push(next.clone());
            }
            let improves = scored.score.composite > current_set.score.composite;
            if improves && best.as_ref().is_none_or(|(_, b)| compare_ranked(&scored, b) == Ordering::Less) {
                best = Some((next, scored));
            }
        }
        match best {
            Some((next, scored)) => {
                current = next;
                current_set = scored;
            }
            None => break,
        }
    }
    Ok(visited)
}

/// Ranking order: composite descending, then lower coupling, higher
/// cohesion, fewer members and finally lexicographic member ids.
pub fn compare_ranked(a: &CapabilitySet, b: &CapabilitySet) -> Ordering {
    b.score
        .composite
        .total_cmp(&a.score.composite)
        .then_with(|| a.score.coupling.total_cmp(&b.score.coupling))
        .then_with(|| b.score.cohesion.total_cmp(&a.score.cohesion))
        .then_with(|| a.members.len().cmp(&b.members.len()))
        .then_with(|| a.members.cmp(&b.members))
}

/// Re-weights and sorts candidates into ranking order.
pub fn rank_candidates(mut candidates: Vec<CapabilitySet>, weights: &ScoreWeights) -> Result<Vec<CapabilitySet>, FormulationError> {
    weights.check()?;
    if let Some(first) = candidates.first() {
        let graph = first.graph.clone();
        if candidates.iter().any(|c| c.graph != graph) {
            return Err(FormulationError::MixedGraphCandidates);
        }
    }
    for c in &mut candidates {
        c.score.reweight(weights);
    }
    candidates.sort_by(compare_ranked);
    Ok(candidates)
}
