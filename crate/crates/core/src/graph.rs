//! Function decomposition (FD) graph: entity types, structural validation
//! and the ancestry/descendant/directive-set primitives the rest of the
//! crate is built on.
//!
//! A graph is rooted at a single mission node. Internal nodes are functional
//! abstractions and every leaf is a directive. Edges are typed as
//! decomposition, refinement or intersection. [`FdGraph`] values are only
//! produced by [`FdGraph::build`], which rejects anything violating those
//! rules, so every query below can assume a well-formed DAG.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::ids::{NeedId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeedStatus {
    Active,
    Retired,
}

/// A stakeholder need stated in problem-domain language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Need {
    pub id: NeedId,
    pub text: String,
    /// Stakeholder viewpoint the need was elicited from, direct or indirect.
    pub user_view: String,
    pub status: NeedStatus,
}

impl Need {
    pub fn new(id: impl Into<NeedId>, text: impl Into<String>, user_view: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            user_view: user_view.into(),
            status: NeedStatus::Active,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Mission,
    Functional,
    Directive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Decomposition,
    Intersection,
    Refinement,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 3] = [
        EdgeKind::Decomposition,
        EdgeKind::Intersection,
        EdgeKind::Refinement,
    ];
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Decomposition => "decomposition",
            EdgeKind::Intersection => "intersection",
            EdgeKind::Refinement => "refinement",
        })
    }
}

/// Risk categories guiding relevance assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskCategory {
    Catastrophic,
    Critical,
    Marginal,
    Negligible,
}

impl RiskCategory {
    pub const ALL: [RiskCategory; 4] = [
        RiskCategory::Catastrophic,
        RiskCategory::Critical,
        RiskCategory::Marginal,
        RiskCategory::Negligible,
    ];

    /// Relevance used when only the category is known.
    pub fn default_relevance(self) -> f64 {
        match self {
            RiskCategory::Catastrophic => 1.0,
            RiskCategory::Critical => 0.7,
            RiskCategory::Marginal => 0.4,
            RiskCategory::Negligible => 0.1,
        }
    }

    /// Whether `relevance` falls in this category's band. The top band is
    /// closed on both ends, the others are half-open `[low, high)`.
    pub fn admits(self, relevance: f64) -> bool {
        match self {
            RiskCategory::Catastrophic => (0.85..=1.0).contains(&relevance),
            RiskCategory::Critical => (0.6..0.85).contains(&relevance),
            RiskCategory::Marginal => (0.3..0.6).contains(&relevance),
            RiskCategory::Negligible => (0.0..0.3).contains(&relevance),
        }
    }

    /// The category whose band contains `relevance`, if it is in `[0, 1]`.
    pub fn for_relevance(relevance: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.admits(relevance))
    }
}

/// Leaf payload: a requirement with context information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Directive {
    pub relevance: f64,
    pub risk_category: RiskCategory,
    /// Person-days.
    pub effort: f64,
    /// Technology readiness level, 1..=9.
    pub tech_readiness: u8,
}

impl Directive {
    /// A directive whose relevance is the category default.
    pub fn from_category(category: RiskCategory, effort: f64, tech_readiness: u8) -> Self {
        Self {
            relevance: category.default_relevance(),
            risk_category: category,
            effort,
            tech_readiness,
        }
    }

    /// A directive whose category is derived from the relevance band.
    pub fn from_relevance(relevance: f64, effort: f64, tech_readiness: u8) -> Self {
        Self {
            relevance,
            risk_category: RiskCategory::for_relevance(relevance).unwrap_or(RiskCategory::Negligible),
            effort,
            tech_readiness,
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.relevance) {
            out.push(format!("relevance {} outside [0,1]", self.relevance));
        } else if !self.risk_category.admits(self.relevance) {
            out.push(format!(
                "relevance {} outside the {:?} band",
                self.relevance, self.risk_category
            ));
        }
        if !(self.effort >= 0.0 && self.effort.is_finite()) {
            out.push(format!("effort {} must be a finite value >= 0", self.effort));
        }
        if !(1..=9).contains(&self.tech_readiness) {
            out.push(format!("tech readiness {} outside 1..=9", self.tech_readiness));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FdNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    #[serde(default)]
    pub need_refs: BTreeSet<NeedId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<Directive>,
}

impl FdNode {
    pub fn mission(id: impl Into<NodeId>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Mission,
            label: label.into(),
            need_refs: BTreeSet::new(),
            directive: None,
        }
    }

    pub fn functional(id: impl Into<NodeId>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Functional,
            label: label.into(),
            need_refs: BTreeSet::new(),
            directive: None,
        }
    }

    pub fn directive(id: impl Into<NodeId>, label: impl Into<String>, payload: Directive) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Directive,
            label: label.into(),
            need_refs: BTreeSet::new(),
            directive: Some(payload),
        }
    }

    pub fn with_needs<I, N>(mut self, needs: I) -> Self
    where
        I: IntoIterator<Item = N>,
        N: Into<NeedId>,
    {
        self.need_refs.extend(needs.into_iter().map(Into::into));
        self
    }

    pub fn is_directive(&self) -> bool {
        self.kind == NodeKind::Directive
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(source: impl Into<NodeId>, target: impl Into<NodeId>, kind: EdgeKind) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            kind,
        }
    }
}

/// Which of the three spaces an entity lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceTag {
    Problem,
    Transition,
    Solution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    DuplicateId,
    UnknownEndpoint,
    DuplicateEdge,
    EmptyLabel,
    DirectivePayloadMismatch,
    InvalidDirective,
    MissingMission,
    MultipleRoots,
    MissionHasParent,
    CycleDetected,
    UnreachableNode,
    DirectiveWithChildren,
    InternalLeaf,
    MixedEdgeKinds,
    RefinementFanout,
    DecompositionFanout,
    IntersectionSingleParent,
    MissingNeedRefs,
    UnknownNeedRef,
    EmptyText,
    InvalidRequirement,
    InvalidSettings,
    SelectionInconsistent,
    UnsupportedFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub code: ViolationCode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<(NodeId, NodeId)>,
    pub message: String,
}

impl Violation {
    pub fn node(code: ViolationCode, node: &NodeId, message: impl Into<String>) -> Self {
        Self {
            code,
            nodes: vec![node.clone()],
            edges: Vec::new(),
            message: message.into(),
        }
    }

    fn edge(code: ViolationCode, edge: &Edge, message: impl Into<String>) -> Self {
        Self {
            code,
            nodes: Vec::new(),
            edges: vec![(edge.source.clone(), edge.target.clone())],
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

/// Structural violations found in a graph. Empty iff the graph is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph: {0}")]
    Invalid(ValidationReport),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("at least one edge kind is required")]
    NoEdgeKinds,
}

impl GraphError {
    /// Violation codes carried by an `Invalid` error.
    pub fn codes(&self) -> Vec<ViolationCode> {
        match self {
            GraphError::Invalid(report) => report.codes(),
            _ => Vec::new(),
        }
    }
}

/// Checks a candidate node/edge set against every FD graph rule.
///
/// Violations are data: the report lists each problem with the offending
/// node or edge ids. Problems that make later checks meaningless (unknown
/// endpoints, cycles) suppress only the checks that depend on them.
pub fn validate_graph(nodes: &[FdNode], edges: &[Edge]) -> ValidationReport {
    use ViolationCode::*;

    let mut out = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            out.push(Violation::node(DuplicateId, &node.id, format!("node id `{}` is not unique", node.id)));
        }
    }
    // Keep the first occurrence of duplicated ids.
    for (i, node) in nodes.iter().enumerate().rev() {
        index.insert(node.id.as_str(), i);
    }

    let n = nodes.len();
    let mut children: Vec<Vec<(usize, EdgeKind)>> = vec![Vec::new(); n];
    let mut parents: Vec<Vec<(usize, EdgeKind)>> = vec![Vec::new(); n];
    let mut seen_pairs = BTreeSet::new();
    for edge in edges {
        let (Some(&s), Some(&t)) = (index.get(edge.source.as_str()), index.get(edge.target.as_str())) else {
            out.push(Violation::edge(
                UnknownEndpoint,
                edge,
                format!("edge {} -> {} references an unknown node", edge.source, edge.target),
            ));
            continue;
        };
        if !seen_pairs.insert((s, t)) {
            out.push(Violation::edge(
                DuplicateEdge,
                edge,
                format!("more than one edge {} -> {}", edge.source, edge.target),
            ));
            continue;
        }
        children[s].push((t, edge.kind));
        parents[t].push((s, edge.kind));
    }

    for node in nodes {
        if node.label.trim().is_empty() {
            out.push(Violation::node(EmptyLabel, &node.id, format!("node `{}` has an empty label", node.id)));
        }
        match (&node.directive, node.kind) {
            (Some(d), NodeKind::Directive) => {
                for problem in d.problems() {
                    out.push(Violation::node(InvalidDirective, &node.id, format!("directive `{}`: {problem}", node.id)));
                }
            }
            (None, NodeKind::Directive) => out.push(Violation::node(
                DirectivePayloadMismatch,
                &node.id,
                format!("directive `{}` has no directive attributes", node.id),
            )),
            (Some(_), _) => out.push(Violation::node(
                DirectivePayloadMismatch,
                &node.id,
                format!("non-directive node `{}` carries directive attributes", node.id),
            )),
            (None, _) => {}
        }
    }

    let missions: Vec<usize> = (0..n).filter(|&i| nodes[i].kind == NodeKind::Mission).collect();
    let mission = missions.first().copied();
    if missions.is_empty() {
        out.push(Violation {
            code: MissingMission,
            nodes: Vec::new(),
            edges: Vec::new(),
            message: "graph has no mission node".into(),
        });
    }
    for &m in &missions {
        if !parents[m].is_empty() {
            out.push(Violation::node(MissionHasParent, &nodes[m].id, format!("mission `{}` has incoming edges", nodes[m].id)));
        }
    }
    for i in 0..n {
        let extra_mission = nodes[i].kind == NodeKind::Mission && Some(i) != mission;
        let parentless = nodes[i].kind != NodeKind::Mission && parents[i].is_empty();
        if extra_mission || parentless {
            out.push(Violation::node(
                MultipleRoots,
                &nodes[i].id,
                format!("`{}` is a second root; only the mission node may be parentless", nodes[i].id),
            ));
        }
    }

    // Kahn's algorithm; whatever is left over sits on or behind a cycle.
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(c, _) in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    let acyclic = order.len() == n;
    if !acyclic {
        let mut stuck: Vec<NodeId> = (0..n).filter(|&i| indegree[i] > 0).map(|i| nodes[i].id.clone()).collect();
        stuck.sort();
        out.push(Violation {
            code: CycleDetected,
            message: format!("cycle through {}", join_ids(&stuck)),
            nodes: stuck,
            edges: Vec::new(),
        });
    }

    if let Some(m) = mission {
        let reached = reach_from(m, &children);
        for i in 0..n {
            if !reached[i] && !parents[i].is_empty() {
                out.push(Violation::node(
                    UnreachableNode,
                    &nodes[i].id,
                    format!("`{}` is not reachable from the mission node", nodes[i].id),
                ));
            }
        }
    }

    for i in 0..n {
        let node = &nodes[i];
        let out_edges = &children[i];
        if node.kind == NodeKind::Directive {
            if !out_edges.is_empty() {
                out.push(Violation::node(DirectiveWithChildren, &node.id, format!("directive `{}` has outgoing edges", node.id)));
            }
            continue;
        }
        if out_edges.is_empty() {
            out.push(Violation::node(InternalLeaf, &node.id, format!("non-directive node `{}` has no children", node.id)));
            continue;
        }
        let structural: BTreeSet<EdgeKind> = out_edges
            .iter()
            .map(|&(_, k)| k)
            .filter(|&k| k != EdgeKind::Intersection)
            .collect();
        if structural.len() > 1 {
            out.push(Violation::node(
                MixedEdgeKinds,
                &node.id,
                format!("`{}` mixes decomposition and refinement children", node.id),
            ));
        }
        if structural.contains(&EdgeKind::Refinement) && out_edges.len() != 1 {
            out.push(Violation::node(
                RefinementFanout,
                &node.id,
                format!("`{}` has a refinement edge but {} children", node.id, out_edges.len()),
            ));
        }
        let decompositions = out_edges.iter().filter(|&&(_, k)| k == EdgeKind::Decomposition).count();
        if decompositions == 1 {
            out.push(Violation::node(
                DecompositionFanout,
                &node.id,
                format!("`{}` decomposes into a single child; use refinement", node.id),
            ));
        }
    }

    for i in 0..n {
        if parents[i].iter().any(|&(_, k)| k == EdgeKind::Intersection) && parents[i].len() < 2 {
            out.push(Violation::node(
                IntersectionSingleParent,
                &nodes[i].id,
                format!("intersection target `{}` has a single parent", nodes[i].id),
            ));
        }
    }

    // Provenance may be inherited: a node is covered when it or any
    // ancestor references a need.
    if acyclic {
        let mut covered = vec![false; n];
        for &v in &order {
            covered[v] = !nodes[v].need_refs.is_empty() || parents[v].iter().any(|&(p, _)| covered[p]);
        }
        for &v in &order {
            if nodes[v].kind != NodeKind::Mission && !covered[v] {
                out.push(Violation::node(
                    MissingNeedRefs,
                    &nodes[v].id,
                    format!("neither `{}` nor any ancestor references a need", nodes[v].id),
                ));
            }
        }
    }

    ValidationReport { violations: out }
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")
}

fn reach_from(start: usize, adjacency: &[Vec<(usize, EdgeKind)>]) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &(c, _) in &adjacency[v] {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

/// Nodes along a downward path, each with the kind of the edge that led to it
/// (`None` for the first node).
pub type GraphPath = Vec<(NodeId, Option<EdgeKind>)>;

/// A validated, immutable FD graph.
///
/// Nodes are kept sorted by id and edges sorted by `(source, target)`, so two
/// graphs built from the same content compare equal regardless of input order.
#[derive(Debug, Clone)]
pub struct FdGraph {
    nodes: Vec<FdNode>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
    children: Vec<Vec<(usize, EdgeKind)>>,
    parents: Vec<Vec<(usize, EdgeKind)>>,
    mission: usize,
    topo: Vec<usize>,
    levels: Vec<u32>,
    /// Directive ordinal -> node index.
    directives: Vec<usize>,
    directive_bits: Vec<BitSet>,
    descendant_bits: Vec<BitSet>,
    fingerprint: String,
}

impl PartialEq for FdGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl FdGraph {
    /// Builds a graph, failing with every violation found if any rule is broken.
    pub fn build(mut nodes: Vec<FdNode>, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        let report = validate_graph(&nodes, &edges);
        if !report.is_empty() {
            return Err(GraphError::Invalid(report));
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        edges.sort();

        let n = nodes.len();
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, v)| (v.id.clone(), i)).collect();
        let mut children = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        for e in &edges {
            let (s, t) = (index[&e.source], index[&e.target]);
            children[s].push((t, e.kind));
            parents[t].push((s, e.kind));
        }
        let mission = nodes.iter().position(|v| v.kind == NodeKind::Mission).expect("validated");

        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            topo.push(v);
            for &(c, _) in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }

        let mut levels = vec![u32::MAX; n];
        levels[mission] = 0;
        let mut bfs = VecDeque::from([mission]);
        while let Some(v) = bfs.pop_front() {
            for &(c, _) in &children[v] {
                if levels[c] == u32::MAX {
                    levels[c] = levels[v] + 1;
                    bfs.push_back(c);
                }
            }
        }

        let directives: Vec<usize> = (0..n).filter(|&i| nodes[i].is_directive()).collect();
        let mut directive_ordinal = vec![None; n];
        for (ord, &i) in directives.iter().enumerate() {
            directive_ordinal[i] = Some(ord);
        }
        let mut directive_bits = vec![BitSet::with_capacity(directives.len()); n];
        let mut descendant_bits = vec![BitSet::with_capacity(n); n];
        for &v in topo.iter().rev() {
            let mut dset = BitSet::with_capacity(directives.len());
            let mut desc = BitSet::with_capacity(n);
            if let Some(ord) = directive_ordinal[v] {
                dset.insert(ord);
            }
            for &(c, _) in &children[v] {
                dset.union_with(&directive_bits[c]);
                desc.insert(c);
                desc.union_with(&descendant_bits[c]);
            }
            directive_bits[v] = dset;
            descendant_bits[v] = desc;
        }

        let fingerprint = {
            let bytes = serde_json::to_vec(&(&nodes, &edges)).expect("graph content serializes");
            let digest = Sha256::digest(&bytes);
            digest[..8].iter().map(|b| format!("{b:02x}")).collect()
        };

        Ok(Self {
            fingerprint,
            nodes,
            edges,
            index,
            children,
            parents,
            mission,
            topo,
            levels,
            directives,
            directive_bits,
            descendant_bits,
        })
    }

    /// Short content digest; equal graphs have equal fingerprints.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn nodes(&self) -> &[FdNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn mission(&self) -> &FdNode {
        &self.nodes[self.mission]
    }

    pub fn node(&self, id: &str) -> Option<&FdNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// The directive payload of `id`, if it is a directive node.
    pub fn directive(&self, id: &str) -> Option<&Directive> {
        self.node(id).and_then(|n| n.directive.as_ref())
    }

    pub fn directive_ids(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.directives.iter().map(|&i| &self.nodes[i].id)
    }

    pub fn directive_count(&self) -> usize {
        self.directives.len()
    }

    /// Functional nodes: neither the mission nor a directive.
    pub fn internal_ids(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Functional)
            .map(|n| &n.id)
    }

    pub fn is_internal(&self, id: &str) -> bool {
        self.node(id).is_some_and(|n| n.kind == NodeKind::Functional)
    }

    /// Node ids in a topological order (parents before children).
    pub fn topological_order(&self) -> Vec<&NodeId> {
        self.topo.iter().map(|&i| &self.nodes[i].id).collect()
    }

    /// Direct children with the kind of the connecting edge.
    pub fn children(&self, id: &str) -> Result<Vec<(&NodeId, EdgeKind)>, GraphError> {
        let i = self.idx(id)?;
        Ok(self.children[i].iter().map(|&(c, k)| (&self.nodes[c].id, k)).collect())
    }

    pub fn parents(&self, id: &str) -> Result<Vec<(&NodeId, EdgeKind)>, GraphError> {
        let i = self.idx(id)?;
        Ok(self.parents[i].iter().map(|&(p, k)| (&self.nodes[p].id, k)).collect())
    }

    /// Directive leaves reachable from `id`; a directive maps to itself.
    pub fn directive_set(&self, id: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let i = self.idx(id)?;
        Ok(self.directive_bits[i]
            .iter()
            .map(|ord| self.nodes[self.directives[ord]].id.clone())
            .collect())
    }

    /// Number of edges on the shortest path from the mission node.
    pub fn abstraction_level(&self, id: &str) -> Result<u32, GraphError> {
        Ok(self.levels[self.idx(id)?])
    }

    /// Largest abstraction level over all nodes.
    pub fn depth(&self) -> u32 {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    /// Transitive closure of `id` following only edges whose kind is in
    /// `kinds`. The start node is never part of the result.
    pub fn descendants(&self, id: &str, kinds: &[EdgeKind]) -> Result<BTreeSet<NodeId>, GraphError> {
        self.closure(id, kinds, &self.children)
    }

    pub fn ancestors(&self, id: &str, kinds: &[EdgeKind]) -> Result<BTreeSet<NodeId>, GraphError> {
        self.closure(id, kinds, &self.parents)
    }

    /// True when `ancestor` reaches `descendant` over edges of any kind.
    pub fn is_ancestor(&self, ancestor: &str, descendant: &str) -> Result<bool, GraphError> {
        let (a, d) = (self.idx(ancestor)?, self.idx(descendant)?);
        Ok(self.descendant_bits[a].contains(d))
    }

    /// Shortest chain of edges from `from` down to `to`, both inclusive,
    /// choosing the lexicographically smallest parent at each step. Returns
    /// `None` when `to` is not a descendant of `from`.
    pub fn path_between(&self, from: &str, to: &str) -> Result<Option<GraphPath>, GraphError> {
        let (s, t) = (self.idx(from)?, self.idx(to)?);
        if s == t {
            return Ok(Some(vec![(self.nodes[s].id.clone(), None)]));
        }
        if !self.descendant_bits[s].contains(t) {
            return Ok(None);
        }
        let mut prev: Vec<Option<(usize, EdgeKind)>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            for &(c, k) in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    prev[c] = Some((v, k));
                    queue.push_back(c);
                }
            }
        }
        let mut chain = vec![];
        let mut cur = t;
        while cur != s {
            let (p, k) = prev[cur].expect("reachable");
            chain.push((self.nodes[cur].id.clone(), Some(k)));
            cur = p;
        }
        chain.push((self.nodes[s].id.clone(), None));
        chain.reverse();
        Ok(Some(chain))
    }

    fn closure(
        &self,
        id: &str,
        kinds: &[EdgeKind],
        adjacency: &[Vec<(usize, EdgeKind)>],
    ) -> Result<BTreeSet<NodeId>, GraphError> {
        let start = self.idx(id)?;
        if kinds.is_empty() {
            return Err(GraphError::NoEdgeKinds);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        let mut out = BTreeSet::new();
        while let Some(v) = stack.pop() {
            for &(w, k) in &adjacency[v] {
                if kinds.contains(&k) && !seen[w] {
                    seen[w] = true;
                    out.insert(self.nodes[w].id.clone());
                    stack.push(w);
                }
            }
        }
        Ok(out)
    }

    fn idx(&self, id: &str) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(NodeId::from(id)))
    }

    // Crate-internal accessors used by formulation and metrics.

    pub(crate) fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn directive_bits_of(&self, idx: usize) -> &BitSet {
        &self.directive_bits[idx]
    }

    pub(crate) fn descendant_bits_of(&self, idx: usize) -> &BitSet {
        &self.descendant_bits[idx]
    }

    pub(crate) fn node_at(&self, idx: usize) -> &FdNode {
        &self.nodes[idx]
    }

    pub(crate) fn level_at(&self, idx: usize) -> u32 {
        self.levels[idx]
    }

    pub(crate) fn children_at(&self, idx: usize) -> &[(usize, EdgeKind)] {
        &self.children[idx]
    }

    pub(crate) fn mission_index(&self) -> usize {
        self.mission
    }

    pub(crate) fn directive_node_at(&self, ordinal: usize) -> &FdNode {
        &self.nodes[self.directives[ordinal]]
    }

    /// Need ids referenced by `id` or by any of its ancestors, each mapped to
    /// the nodes that carry the reference.
    pub fn inherited_needs(&self, id: &str) -> Result<BTreeMap<NeedId, BTreeSet<NodeId>>, GraphError> {
        let mut scope = self.ancestors(id, &EdgeKind::ALL)?;
        scope.insert(NodeId::from(id));
        let mut out: BTreeMap<NeedId, BTreeSet<NodeId>> = BTreeMap::new();
        for node_id in scope {
            for need in &self.nodes[self.index[&node_id]].need_refs {
                out.entry(need.clone()).or_default().insert(node_id.clone());
            }
        }
        Ok(out)
    }
}
