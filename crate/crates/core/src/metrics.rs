//! Cohesion, coupling and abstraction-balance scores for Capability sets.
//!
//! * cohesion: mean relevance over a node's directive set
//! * coupling: Jaccard overlap of two nodes' directive sets
//! * abstraction imbalance: spread of abstraction levels, normalised by depth
//!
//! The composite is `wc * cohesion - wk * coupling - wa * imbalance`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{check_candidate, CandidateCheck};
use crate::graph::{FdGraph, GraphError, NodeKind, RiskCategory};
use crate::ids::NodeId;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("`{0}` is not an internal (functional) node")]
    NotInternalNode(NodeId),
    #[error("`{0}` and `{1}` are the same node or one is an ancestor of the other")]
    AncestorOverlap(NodeId, NodeId),
    #[error("node set is empty")]
    EmptySet,
    #[error("not a valid candidate: {0}")]
    InvalidCandidate(CandidateCheck),
    #[error("invalid score weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Graph(GraphError),
}

impl From<GraphError> for MetricError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::UnknownNode(id) => MetricError::UnknownNode(id),
            other => MetricError::Graph(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreWeights {
    pub cohesion: f64,
    pub coupling: f64,
    pub abstraction: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            cohesion: 1.0,
            coupling: 1.0,
            abstraction: 0.5,
        }
    }
}

impl ScoreWeights {
    pub fn new(cohesion: f64, coupling: f64, abstraction: f64) -> Result<Self, MetricError> {
        let w = Self {
            cohesion,
            coupling,
            abstraction,
        };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<(), MetricError> {
        let all = [self.cohesion, self.coupling, self.abstraction];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MetricError::InvalidWeights("weights must be finite and >= 0".into()));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(MetricError::InvalidWeights("at least one weight must be > 0".into()));
        }
        Ok(())
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            cohesion: self.cohesion * factor,
            coupling: self.coupling * factor,
            abstraction: self.abstraction * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SetScore {
    pub cohesion: f64,
    pub coupling: f64,
    pub abstraction_imbalance: f64,
    pub composite: f64,
}

impl SetScore {
    pub fn new(cohesion: f64, coupling: f64, abstraction_imbalance: f64, weights: &ScoreWeights) -> Self {
        let mut s = Self {
            cohesion,
            coupling,
            abstraction_imbalance,
            composite: 0.0,
        };
        s.reweight(weights);
        s
    }

    /// Recomputes the composite from the stored components.
    pub fn reweight(&mut self, weights: &ScoreWeights) {
        self.composite = weights.cohesion * self.cohesion
            - weights.coupling * self.coupling
            - weights.abstraction * self.abstraction_imbalance;
    }
}

/// Default relevance for a risk category.
pub fn relevance_from_category(category: RiskCategory) -> f64 {
    category.default_relevance()
}

fn internal_index(graph: &FdGraph, id: &str) -> Result<usize, MetricError> {
    let idx = graph
        .index_of(id)
        .ok_or_else(|| MetricError::UnknownNode(id.into()))?;
    if graph.node_at(idx).kind != NodeKind::Functional {
        return Err(MetricError::NotInternalNode(id.into()));
    }
    Ok(idx)
}

/// Mean relevance of the directives under an internal node.
pub fn cohesion(graph: &FdGraph, node: &str) -> Result<f64, MetricError> {
    let idx = internal_index(graph, node)?;
    Ok(cohesion_at(graph, idx))
}

pub(crate) fn cohesion_at(graph: &FdGraph, idx: usize) -> f64 {
    let bits = graph.directive_bits_of(idx);
    let count = bits.count();
    if count == 0 {
        return 0.0;
    }
    let sum: f64 = bits
        .iter()
        .map(|ord| graph.directive_node_at(ord).directive.as_ref().map_or(0.0, |d| d.relevance))
        .sum();
    sum / count as f64
}

/// Jaccard index of the two nodes' directive sets.
pub fn coupling(graph: &FdGraph, a: &str, b: &str) -> Result<f64, MetricError> {
    let (ia, ib) = (internal_index(graph, a)?, internal_index(graph, b)?);
    if ia == ib || graph.descendant_bits_of(ia).contains(ib) || graph.descendant_bits_of(ib).contains(ia) {
        return Err(MetricError::AncestorOverlap(a.into(), b.into()));
    }
    Ok(coupling_at(graph, ia, ib))
}

pub(crate) fn coupling_at(graph: &FdGraph, a: usize, b: usize) -> f64 {
    let (sa, sb) = (graph.directive_bits_of(a), graph.directive_bits_of(b));
    let union = sa.union_count(sb);
    if union == 0 {
        return 0.0;
    }
    sa.intersection_count(sb) as f64 / union as f64
}

/// `(max level - min level) / max(1, depth)` over the given internal nodes.
pub fn abstraction_imbalance<'a, I>(graph: &FdGraph, nodes: I) -> Result<f64, MetricError>
where
    I: IntoIterator<Item = &'a NodeId>,
{
    let idxs = nodes
        .into_iter()
        .map(|id| internal_index(graph, id.as_str()))
        .collect::<Result<Vec<_>, _>>()?;
    if idxs.is_empty() {
        return Err(MetricError::EmptySet);
    }
    Ok(imbalance_at(graph, &idxs))
}

pub(crate) fn imbalance_at(graph: &FdGraph, idxs: &[usize]) -> f64 {
    let levels = idxs.iter().map(|&i| graph.level_at(i));
    let (min, max) = levels.fold((u32::MAX, 0), |(lo, hi), l| (lo.min(l), hi.max(l)));
    if idxs.is_empty() {
        return 0.0;
    }
    f64::from(max - min) / f64::from(graph.depth().max(1))
}

/// Scores an already-validated member set given by node indices.
pub(crate) fn score_at(graph: &FdGraph, idxs: &[usize], weights: &ScoreWeights) -> SetScore {
    let cohesion = idxs.iter().map(|&i| cohesion_at(graph, i)).sum::<f64>() / idxs.len().max(1) as f64;
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for (k, &a) in idxs.iter().enumerate() {
        for &b in &idxs[k + 1..] {
            pair_sum += coupling_at(graph, a, b);
            pairs += 1;
        }
    }
    let coupling = if pairs == 0 { 0.0 } else { pair_sum / pairs as f64 };
    SetScore::new(cohesion, coupling, imbalance_at(graph, idxs), weights)
}

/// Scores a candidate Capability set. Members must form a valid candidate.
pub fn score_set(graph: &FdGraph, nodes: &BTreeSet<NodeId>, weights: &ScoreWeights) -> Result<SetScore, MetricError> {
    weights.check()?;
    match check_candidate(graph, nodes) {
        Ok(CandidateCheck::Valid) => {}
        Ok(reason) => return Err(MetricError::InvalidCandidate(reason)),
        Err(e) => return Err(e.into()),
    }
    let idxs: Vec<usize> = nodes
        .iter()
        .map(|id| graph.index_of(id.as_str()).expect("checked"))
        .collect();
    Ok(score_at(graph, &idxs, weights))
}
