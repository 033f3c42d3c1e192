//! Trace queries and change-impact reports over a project snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeKind, FdGraph, NodeKind, SpaceTag};
use crate::ids::{NeedId, NodeId, RequirementId};
use crate::metrics::coupling;
use crate::store::Project;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("unknown need `{0}`")]
    UnknownNeed(NeedId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown directive `{0}`")]
    UnknownDirective(NodeId),
    #[error("`{0}` is not a member of the chosen Capability set")]
    UnknownCapability(NodeId),
    #[error("unknown requirement `{0}`")]
    UnknownRequirement(RequirementId),
    #[error("requirement `{0}` has no source need")]
    NoSourceNeed(RequirementId),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
}

/// Reference to any traceable entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", content = "id")]
pub enum EntityRef {
    Need(NeedId),
    Node(NodeId),
    Directive(NodeId),
    Capability(NodeId),
    Requirement(RequirementId),
}

impl EntityRef {
    pub fn id(&self) -> &str {
        match self {
            EntityRef::Need(id) => id.as_str(),
            EntityRef::Node(id) | EntityRef::Directive(id) | EntityRef::Capability(id) => id.as_str(),
            EntityRef::Requirement(id) => id.as_str(),
        }
    }

    /// Graph node reference with the kind taken from the graph.
    pub fn graph_node(graph: &FdGraph, id: &NodeId) -> Self {
        match graph.node(id.as_str()).map(|n| n.kind) {
            Some(NodeKind::Directive) => EntityRef::Directive(id.clone()),
            _ => EntityRef::Node(id.clone()),
        }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            EntityRef::Need(_) => "need",
            EntityRef::Node(_) => "node",
            EntityRef::Directive(_) => "directive",
            EntityRef::Capability(_) => "capability",
            EntityRef::Requirement(_) => "requirement",
        };
        write!(f, "{kind}:{}", self.id())
    }
}

/// Kind of a recorded link between two entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum LinkKind {
    NeedRef,
    GraphEdge { kind: EdgeKind },
    CapabilityMembership,
    Transformation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceStep {
    pub entity: EntityRef,
    pub space: SpaceTag,
    /// Link from the previous step; absent on the first step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TracePath {
    pub steps: Vec<TraceStep>,
}

impl TracePath {
    pub fn last(&self) -> Option<&EntityRef> {
        self.steps.last().map(|s| &s.entity)
    }

    pub fn contains(&self, entity: &EntityRef) -> bool {
        self.steps.iter().any(|s| &s.entity == entity)
    }
}

fn step(entity: EntityRef, link: Option<LinkKind>) -> TraceStep {
    let space = match entity {
        EntityRef::Need(_) => SpaceTag::Problem,
        EntityRef::Requirement(_) => SpaceTag::Solution,
        _ => SpaceTag::Transition,
    };
    TraceStep { entity, space, link }
}

/// Capabilities linked to a requirement: the chosen owners of its source
/// directive, or its recorded capability when no chosen member owns it.
fn requirement_capabilities(project: &Project, directive: &NodeId, recorded: &NodeId) -> BTreeSet<NodeId> {
    let owners: BTreeSet<NodeId> = project
        .selection()
        .map(|s| s.owners_of(directive.as_str()).cloned().collect())
        .unwrap_or_default();
    if owners.is_empty() {
        BTreeSet::from([recorded.clone()])
    } else {
        owners
    }
}

fn requirements_by_directive(project: &Project) -> BTreeMap<&NodeId, Vec<&crate::transformation::Requirement>> {
    let mut out: BTreeMap<&NodeId, Vec<_>> = BTreeMap::new();
    for r in project.requirements().values() {
        out.entry(&r.source_directive_id).or_default().push(r);
    }
    out
}

/// One resolved forward chain; `capability` and `requirement` are absent
/// when the chain stops early.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Chain {
    node: NodeId,
    directive: NodeId,
    capability: Option<NodeId>,
    requirement: Option<RequirementId>,
}

fn chains(project: &Project, need: &NeedId) -> Vec<Chain> {
    let graph = project.graph();
    let reqs = requirements_by_directive(project);
    let mut out = Vec::new();
    for node in graph.nodes().iter().filter(|n| n.need_refs.contains(need)) {
        let directives = graph.directive_set(node.id.as_str()).expect("node exists");
        for d in directives {
            let owners: BTreeSet<NodeId> = project
                .selection()
                .map(|s| s.owners_of(d.as_str()).cloned().collect())
                .unwrap_or_default();
            let drs = reqs.get(&d).map(Vec::as_slice).unwrap_or_default();
            let mut emitted = false;
            for r in drs {
                for cap in requirement_capabilities(project, &d, &r.capability_id) {
                    out.push(Chain {
                        node: node.id.clone(),
                        directive: d.clone(),
                        capability: Some(cap),
                        requirement: Some(r.id.clone()),
                    });
                    emitted = true;
                }
            }
            if emitted {
                continue;
            }
            if owners.is_empty() {
                out.push(Chain {
                    node: node.id.clone(),
                    directive: d.clone(),
                    capability: None,
                    requirement: None,
                });
            }
            for cap in owners {
                out.push(Chain {
                    node: node.id.clone(),
                    directive: d.clone(),
                    capability: Some(cap),
                    requirement: None,
                });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn chain_path(graph: &FdGraph, need: &NeedId, chain: &Chain) -> TracePath {
    let mut steps = vec![step(EntityRef::Need(need.clone()), None)];
    let hops = graph
        .path_between(chain.node.as_str(), chain.directive.as_str())
        .expect("nodes exist")
        .expect("directive lies below its node");
    for (i, (id, kind)) in hops.into_iter().enumerate() {
        let link = if i == 0 {
            LinkKind::NeedRef
        } else {
            LinkKind::GraphEdge {
                kind: kind.expect("non-initial hop has an edge"),
            }
        };
        steps.push(step(EntityRef::graph_node(graph, &id), Some(link)));
    }
    if let Some(cap) = &chain.capability {
        steps.push(step(EntityRef::Capability(cap.clone()), Some(LinkKind::CapabilityMembership)));
    }
    if let Some(req) = &chain.requirement {
        steps.push(step(EntityRef::Requirement(req.clone()), Some(LinkKind::Transformation)));
    }
    TracePath { steps }
}

/// Maximal forward paths from a need through its nodes, their directives,
/// the owning capabilities and the requirements derived from them.
pub fn trace_forward(project: &Project, need: &str) -> Result<Vec<TracePath>, TraceError> {
    let need = project
        .needs()
        .get(need)
        .map(|n| n.id.clone())
        .ok_or_else(|| TraceError::UnknownNeed(need.into()))?;
    let graph = project.graph();
    Ok(chains(project, &need).iter().map(|c| chain_path(graph, &need, c)).collect())
}

/// Requirements reached by [`trace_forward`].
pub fn forward_requirements(project: &Project, need: &str) -> Result<BTreeSet<RequirementId>, TraceError> {
    Ok(trace_forward(project, need)?
        .iter()
        .filter_map(|p| match p.last() {
            Some(EntityRef::Requirement(r)) => Some(r.clone()),
            _ => None,
        })
        .collect())
}

/// Result of tracing a requirement back to its source needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BackwardTrace {
    pub requirement: RequirementId,
    pub source_directive: NodeId,
    pub capabilities: Vec<NodeId>,
    /// Ancestors of the source directive, nearest first.
    pub ancestry: Vec<NodeId>,
    pub needs: Vec<NeedId>,
    /// One path per (capability, need, referencing node), requirement first.
    pub paths: Vec<TracePath>,
}

pub fn trace_backward(project: &Project, requirement: &str) -> Result<BackwardTrace, TraceError> {
    let req = project
        .requirements()
        .get(requirement)
        .ok_or_else(|| TraceError::UnknownRequirement(requirement.into()))?;
    let graph = project.graph();
    let directive = &req.source_directive_id;
    if graph.directive(directive.as_str()).is_none() {
        return Err(TraceError::NoSourceNeed(req.id.clone()));
    }
    let inherited = graph.inherited_needs(directive.as_str()).expect("directive exists");
    if inherited.is_empty() {
        return Err(TraceError::NoSourceNeed(req.id.clone()));
    }
    let mut ancestry: Vec<NodeId> = graph
        .ancestors(directive.as_str(), &EdgeKind::ALL)
        .expect("directive exists")
        .into_iter()
        .collect();
    ancestry.sort_by_key(|id| (std::cmp::Reverse(graph.abstraction_level(id.as_str()).expect("ancestor exists")), id.clone()));
    let capabilities = requirement_capabilities(project, directive, &req.capability_id);

    let mut paths = Vec::new();
    for cap in &capabilities {
        for (need, carriers) in &inherited {
            for node in carriers {
                let chain = Chain {
                    node: node.clone(),
                    directive: directive.clone(),
                    capability: Some(cap.clone()),
                    requirement: Some(req.id.clone()),
                };
                paths.push(reverse(chain_path(graph, need, &chain)));
            }
        }
    }
    Ok(BackwardTrace {
        requirement: req.id.clone(),
        source_directive: directive.clone(),
        capabilities: capabilities.into_iter().collect(),
        ancestry,
        needs: inherited.into_keys().collect(),
        paths,
    })
}

fn reverse(path: TracePath) -> TracePath {
    let n = path.steps.len();
    let mut steps = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let link = if i + 1 < n { path.steps[i + 1].link } else { None };
        steps.push(TraceStep {
            entity: path.steps[i].entity.clone(),
            space: path.steps[i].space,
            link,
        });
    }
    TracePath { steps }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NeighborNeed {
    pub need: NeedId,
    /// Nodes in the trigger's region that carry this need.
    pub shared_nodes: Vec<NodeId>,
}

/// Needs attached to any node that is related by ancestry to a node of the
/// trigger need. The trigger itself is not listed.
pub fn need_neighborhood(project: &Project, need: &str) -> Result<Vec<NeighborNeed>, TraceError> {
    if !project.needs().contains_key(need) {
        return Err(TraceError::UnknownNeed(need.into()));
    }
    let graph = project.graph();
    let mut region = BTreeSet::new();
    for node in graph.nodes().iter().filter(|n| n.need_refs.contains(need)) {
        let id = node.id.as_str();
        region.insert(node.id.clone());
        region.extend(graph.descendants(id, &EdgeKind::ALL).expect("node exists"));
        region.extend(graph.ancestors(id, &EdgeKind::ALL).expect("node exists"));
    }
    let mut out: BTreeMap<NeedId, Vec<NodeId>> = BTreeMap::new();
    for id in &region {
        let node = graph.node(id.as_str()).expect("region node exists");
        for other in node.need_refs.iter().filter(|n| n.as_str() != need) {
            out.entry(other.clone()).or_default().push(id.clone());
        }
    }
    Ok(out
        .into_iter()
        .map(|(need, shared_nodes)| NeighborNeed { need, shared_nodes })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Down,
    Up,
    Both,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "down" => Ok(Direction::Down),
            "up" => Ok(Direction::Up),
            "both" => Ok(Direction::Both),
            other => Err(format!("unknown direction `{other}` (expected down, up or both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// Reached downward from the trigger.
    Affected,
    /// Ancestor of the trigger; worth reviewing but not asserted.
    Review,
    /// Requirement sharing the trigger's source directive.
    Strong,
    /// Requirement of the same capability.
    Moderate,
}

/// Why an entity appears in an impact report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum ImpactLink {
    GraphEdge { kind: EdgeKind },
    Ancestor { kind: EdgeKind },
    CapabilityMembership,
    Transformation,
    Coupling,
    SharedDirective,
    SameCapability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactItem {
    pub id: String,
    pub severity: Severity,
    pub weight: f64,
    pub rationale: ImpactLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImpactReport {
    pub trigger: EntityRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub affected_nodes: Vec<ImpactItem>,
    pub affected_directives: Vec<ImpactItem>,
    pub affected_capabilities: Vec<ImpactItem>,
    pub affected_requirements: Vec<ImpactItem>,
}

impl ImpactReport {
    fn new(trigger: EntityRef, direction: Option<Direction>) -> Self {
        Self {
            trigger,
            direction,
            affected_nodes: Vec::new(),
            affected_directives: Vec::new(),
            affected_capabilities: Vec::new(),
            affected_requirements: Vec::new(),
        }
    }

    /// Every listed entity, in report order.
    pub fn entities(&self) -> Vec<EntityRef> {
        let mut out = Vec::new();
        out.extend(self.affected_nodes.iter().map(|i| EntityRef::Node(i.id.as_str().into())));
        out.extend(self.affected_directives.iter().map(|i| EntityRef::Directive(i.id.as_str().into())));
        out.extend(self.affected_capabilities.iter().map(|i| EntityRef::Capability(i.id.as_str().into())));
        out.extend(self.affected_requirements.iter().map(|i| EntityRef::Requirement(i.id.as_str().into())));
        out
    }

    pub fn node_ids(&self) -> BTreeSet<&str> {
        self.affected_nodes.iter().map(|i| i.id.as_str()).collect()
    }

    pub fn directive_ids(&self) -> BTreeSet<&str> {
        self.affected_directives.iter().map(|i| i.id.as_str()).collect()
    }

    pub fn capability_ids(&self) -> BTreeSet<&str> {
        self.affected_capabilities.iter().map(|i| i.id.as_str()).collect()
    }

    pub fn requirement_ids(&self) -> BTreeSet<&str> {
        self.affected_requirements.iter().map(|i| i.id.as_str()).collect()
    }
}

/// Keyed accumulator that keeps the most severe entry per id.
#[derive(Default)]
struct Bucket(BTreeMap<String, ImpactItem>);

impl Bucket {
    fn add(&mut self, id: impl fmt::Display, severity: Severity, weight: f64, rationale: ImpactLink) {
        let item = ImpactItem {
            id: id.to_string(),
            severity,
            weight,
            rationale,
        };
        match self.0.get_mut(&item.id) {
            Some(existing) if (existing.severity, -existing.weight) <= (severity, -weight) => {}
            Some(existing) => *existing = item,
            None => {
                self.0.insert(item.id.clone(), item);
            }
        }
    }

    fn items(self) -> Vec<ImpactItem> {
        self.0.into_values().collect()
    }
}

fn max_relevance<'a>(graph: &FdGraph, directives: impl IntoIterator<Item = &'a NodeId>) -> f64 {
    directives
        .into_iter()
        .filter_map(|d| graph.directive(d.as_str()))
        .map(|d| d.relevance)
        .fold(0.0, f64::max)
}

/// Nodes reached from `start` with the kind of the edge that first reached
/// each one, walking children (`down`) or parents.
fn reach(graph: &FdGraph, start: &str, down: bool) -> BTreeMap<NodeId, EdgeKind> {
    let mut out = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([NodeId::from(start)]);
    while let Some(v) = queue.pop_front() {
        let next = if down {
            graph.children(v.as_str())
        } else {
            graph.parents(v.as_str())
        }
        .expect("reached node exists");
        for (w, k) in next {
            if w.as_str() != start && !out.contains_key(w) {
                out.insert(w.clone(), k);
                queue.push_back(w.clone());
            }
        }
    }
    out
}

/// Impact of changing a graph node (or a need attached to it).
pub fn impact_of_node_change(project: &Project, node: &str, direction: Direction) -> Result<ImpactReport, TraceError> {
    let graph = project.graph();
    let trigger = graph.node(node).ok_or_else(|| TraceError::UnknownNode(node.into()))?;
    let mut report = ImpactReport::new(EntityRef::graph_node(graph, &trigger.id), Some(direction));
    let (mut nodes, mut directives, mut caps, mut reqs) = (Bucket::default(), Bucket::default(), Bucket::default(), Bucket::default());
    let selection = project.selection();
    let by_directive = requirements_by_directive(project);

    if matches!(direction, Direction::Down | Direction::Both) {
        let below = reach(graph, node, true);
        let mut scope: BTreeSet<NodeId> = below.keys().cloned().collect();
        scope.insert(trigger.id.clone());
        for (id, kind) in &below {
            let link = ImpactLink::GraphEdge { kind: *kind };
            match graph.directive(id.as_str()) {
                Some(d) => directives.add(id, Severity::Affected, d.relevance, link),
                None => {
                    let w = max_relevance(graph, &graph.directive_set(id.as_str()).expect("node exists"));
                    nodes.add(id, Severity::Affected, w, link);
                }
            }
        }
        let scoped_directives: BTreeSet<&NodeId> = scope.iter().filter(|id| graph.directive(id.as_str()).is_some()).collect();
        if let Some(sel) = selection {
            for (member, owned) in &sel.chosen_set.assignment {
                let hit: Vec<&NodeId> = owned.iter().filter(|d| scoped_directives.contains(d)).collect();
                if scope.contains(member) || !hit.is_empty() {
                    caps.add(member, Severity::Affected, max_relevance(graph, hit), ImpactLink::CapabilityMembership);
                }
            }
        }
        for d in &scoped_directives {
            let w = graph.directive(d.as_str()).map_or(0.0, |x| x.relevance);
            for r in by_directive.get(d).map(Vec::as_slice).unwrap_or_default() {
                reqs.add(&r.id, Severity::Affected, w, ImpactLink::Transformation);
            }
        }
    }
    if matches!(direction, Direction::Up | Direction::Both) {
        let own = graph.directive_set(node).expect("node exists");
        let w = max_relevance(graph, &own);
        for (id, kind) in reach(graph, node, false) {
            nodes.add(&id, Severity::Review, w, ImpactLink::Ancestor { kind });
            if selection.is_some_and(|s| s.chosen_set.members.contains(&id)) {
                caps.add(&id, Severity::Review, w, ImpactLink::CapabilityMembership);
            }
        }
    }
    report.affected_nodes = nodes.items();
    report.affected_directives = directives.items();
    report.affected_capabilities = caps.items();
    report.affected_requirements = reqs.items();
    Ok(report)
}

/// Impact of changing one directive: its owning capabilities, weighted by
/// its relevance, and its requirements.
pub fn impact_of_directive_change(project: &Project, directive: &str) -> Result<ImpactReport, TraceError> {
    let graph = project.graph();
    let d = graph
        .directive(directive)
        .ok_or_else(|| TraceError::UnknownDirective(directive.into()))?;
    let id = NodeId::from(directive);
    let mut report = ImpactReport::new(EntityRef::Directive(id.clone()), None);
    let mut caps = Bucket::default();
    if let Some(sel) = project.selection() {
        for owner in sel.owners_of(directive) {
            caps.add(owner, Severity::Affected, d.relevance, ImpactLink::CapabilityMembership);
        }
    }
    let mut reqs = Bucket::default();
    for r in project.requirements().values().filter(|r| r.source_directive_id == id) {
        reqs.add(&r.id, Severity::Affected, d.relevance, ImpactLink::Transformation);
    }
    report.affected_capabilities = caps.items();
    report.affected_requirements = reqs.items();
    Ok(report)
}

/// Impact of changing a chosen capability: its directives and requirements
/// plus every other chosen member it is coupled with.
pub fn impact_of_capability_change(project: &Project, capability: &str) -> Result<ImpactReport, TraceError> {
    let graph = project.graph();
    let sel = project
        .selection()
        .filter(|s| s.chosen_set.members.contains(capability))
        .ok_or_else(|| TraceError::UnknownCapability(capability.into()))?;
    let mut report = ImpactReport::new(EntityRef::Capability(capability.into()), None);
    let owned = &sel.chosen_set.assignment[capability];
    let (mut directives, mut reqs, mut caps) = (Bucket::default(), Bucket::default(), Bucket::default());
    for d in owned {
        let rel = graph.directive(d.as_str()).map_or(0.0, |x| x.relevance);
        directives.add(d, Severity::Affected, rel, ImpactLink::CapabilityMembership);
    }
    for r in project.requirements().values().filter(|r| owned.contains(&r.source_directive_id)) {
        let rel = graph.directive(r.source_directive_id.as_str()).map_or(0.0, |x| x.relevance);
        reqs.add(&r.id, Severity::Affected, rel, ImpactLink::Transformation);
    }
    for other in sel.chosen_set.members.iter().filter(|m| m.as_str() != capability) {
        let c = coupling(graph, capability, other.as_str()).expect("chosen members are internal nodes");
        if c > 0.0 {
            caps.add(other, Severity::Affected, c, ImpactLink::Coupling);
        }
    }
    report.affected_directives = directives.items();
    report.affected_capabilities = caps.items();
    report.affected_requirements = reqs.items();
    Ok(report)
}

/// Weight given to requirements that share the trigger's source directive.
pub const STRONG_WEIGHT: f64 = 1.0;
/// Weight given to other requirements of the same capability.
pub const MODERATE_WEIGHT: f64 = 0.5;

/// Impact of changing one requirement: siblings from the same directive are
/// strong, other requirements of the same capability moderate.
pub fn impact_of_requirement_change(project: &Project, requirement: &str) -> Result<ImpactReport, TraceError> {
    let req = project
        .requirements()
        .get(requirement)
        .ok_or_else(|| TraceError::UnknownRequirement(requirement.into()))?;
    let graph = project.graph();
    let mut report = ImpactReport::new(EntityRef::Requirement(req.id.clone()), None);
    let directive = &req.source_directive_id;
    let rel = graph.directive(directive.as_str()).map_or(req.criticality, |d| d.relevance);
    let capabilities = requirement_capabilities(project, directive, &req.capability_id);

    let (mut directives, mut caps, mut reqs) = (Bucket::default(), Bucket::default(), Bucket::default());
    if graph.directive(directive.as_str()).is_some() {
        directives.add(directive, Severity::Affected, rel, ImpactLink::Transformation);
    }
    for cap in &capabilities {
        caps.add(cap, Severity::Affected, rel, ImpactLink::CapabilityMembership);
    }
    for other in project.requirements().values().filter(|r| r.id != req.id) {
        if &other.source_directive_id == directive {
            reqs.add(&other.id, Severity::Strong, STRONG_WEIGHT, ImpactLink::SharedDirective);
            continue;
        }
        let other_caps = requirement_capabilities(project, &other.source_directive_id, &other.capability_id);
        if !other_caps.is_disjoint(&capabilities) {
            reqs.add(&other.id, Severity::Moderate, MODERATE_WEIGHT, ImpactLink::SameCapability);
        }
    }
    report.affected_directives = directives.items();
    report.affected_capabilities = caps.items();
    report.affected_requirements = reqs.items();
    Ok(report)
}

/// Impact of changing a need: the downward impact of every node carrying it.
pub fn impact_of_need_change(project: &Project, need: &str) -> Result<ImpactReport, TraceError> {
    if !project.needs().contains_key(need) {
        return Err(TraceError::UnknownNeed(need.into()));
    }
    let graph = project.graph();
    let mut merged = ImpactReport::new(EntityRef::Need(need.into()), Some(Direction::Down));
    let (mut nodes, mut directives, mut caps, mut reqs) = (Bucket::default(), Bucket::default(), Bucket::default(), Bucket::default());
    for carrier in graph.nodes().iter().filter(|n| n.need_refs.contains(need)) {
        let r = impact_of_node_change(project, carrier.id.as_str(), Direction::Down)?;
        let w = max_relevance(graph, &graph.directive_set(carrier.id.as_str()).expect("node exists"));
        match graph.directive(carrier.id.as_str()) {
            Some(d) => directives.add(&carrier.id, Severity::Affected, d.relevance, ImpactLink::GraphEdge { kind: EdgeKind::Refinement }),
            None => nodes.add(&carrier.id, Severity::Affected, w, ImpactLink::GraphEdge { kind: EdgeKind::Decomposition }),
        }
        for (bucket, items) in [
            (&mut nodes, r.affected_nodes),
            (&mut directives, r.affected_directives),
            (&mut caps, r.affected_capabilities),
            (&mut reqs, r.affected_requirements),
        ] {
            for i in items {
                bucket.add(&i.id, i.severity, i.weight, i.rationale);
            }
        }
    }
    merged.affected_nodes = nodes.items();
    merged.affected_directives = directives.items();
    merged.affected_capabilities = caps.items();
    merged.affected_requirements = reqs.items();
    Ok(merged)
}

/// A recorded link between two entities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TraceLink {
    pub from: EntityRef,
    pub to: EntityRef,
    pub kind: LinkKind,
}

/// Every recorded link with the highest directive relevance reachable
/// through it.
pub fn all_links(project: &Project) -> Vec<(TraceLink, f64)> {
    let graph = project.graph();
    let relevance = |id: &NodeId| graph.directive(id.as_str()).map_or(0.0, |d| d.relevance);
    let below = |id: &NodeId| max_relevance(graph, &graph.directive_set(id.as_str()).expect("node exists"));
    let mut out = Vec::new();
    for node in graph.nodes() {
        for need in &node.need_refs {
            out.push((
                TraceLink {
                    from: EntityRef::Need(need.clone()),
                    to: EntityRef::graph_node(graph, &node.id),
                    kind: LinkKind::NeedRef,
                },
                below(&node.id),
            ));
        }
    }
    for e in graph.edges() {
        out.push((
            TraceLink {
                from: EntityRef::graph_node(graph, &e.source),
                to: EntityRef::graph_node(graph, &e.target),
                kind: LinkKind::GraphEdge { kind: e.kind },
            },
            below(&e.target),
        ));
    }
    if let Some(sel) = project.selection() {
        for (member, owned) in &sel.chosen_set.assignment {
            for d in owned {
                out.push((
                    TraceLink {
                        from: EntityRef::Capability(member.clone()),
                        to: EntityRef::Directive(d.clone()),
                        kind: LinkKind::CapabilityMembership,
                    },
                    relevance(d),
                ));
            }
        }
    }
    for r in project.requirements().values() {
        let rel = graph.directive(r.source_directive_id.as_str()).map_or(r.criticality, |d| d.relevance);
        out.push((
            TraceLink {
                from: EntityRef::Directive(r.source_directive_id.clone()),
                to: EntityRef::Requirement(r.id.clone()),
                kind: LinkKind::Transformation,
            },
            rel,
        ));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Links that lie on a path through at least one directive whose relevance
/// is at least `threshold`.
pub fn critical_traces(project: &Project, threshold: f64) -> Result<Vec<TraceLink>, TraceError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(TraceError::InvalidThreshold(threshold));
    }
    Ok(all_links(project)
        .into_iter()
        .filter(|(_, r)| *r >= threshold)
        .map(|(l, _)| l)
        .collect())
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MatrixRow {
    pub need_id: NeedId,
    pub node_id: NodeId,
    pub directive_id: NodeId,
    pub capability_id: NodeId,
    pub requirement_id: RequirementId,
    pub relevance: f64,
}

pub const MATRIX_HEADER: [&str; 6] = ["need_id", "node_id", "directive_id", "capability_id", "requirement_id", "relevance"];

/// One row per complete forward path, in lexicographic order.
pub fn trace_matrix(project: &Project) -> Vec<MatrixRow> {
    let graph = project.graph();
    let mut rows = Vec::new();
    for need in project.needs().keys() {
        for chain in chains(project, need) {
            if let (Some(capability_id), Some(requirement_id)) = (chain.capability, chain.requirement) {
                let relevance = graph.directive(chain.directive.as_str()).map_or(0.0, |d| d.relevance);
                rows.push(MatrixRow {
                    need_id: need.clone(),
                    node_id: chain.node,
                    directive_id: chain.directive,
                    capability_id,
                    requirement_id,
                    relevance,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.partial_cmp(b).expect("relevance is finite"));
    rows
}

/// Renders rows as RFC 4180 CSV with LF line endings.
pub fn matrix_csv(rows: &[MatrixRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(MATRIX_HEADER).expect("write to memory");
    for r in rows {
        let relevance = r.relevance.to_string();
        w.write_record([
            r.need_id.as_str(),
            r.node_id.as_str(),
            r.directive_id.as_str(),
            r.capability_id.as_str(),
            r.requirement_id.as_str(),
            relevance.as_str(),
        ])
        .expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::store::Mutation;

    fn ids(s: &[&str]) -> BTreeSet<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    fn set(s: BTreeSet<&str>) -> BTreeSet<String> {
        s.into_iter().map(str::to_owned).collect()
    }

    #[test]
    fn n3_down_reaches_n8_and_n9() {
        let p = fixtures::r1_project();
        let r = impact_of_node_change(&p, "n3", Direction::Down).unwrap();
        assert!(r.node_ids().is_superset(&["n8", "n9"].into()));
        assert_eq!(set(r.directive_ids()), ids(&["d10", "d11", "d12", "d13", "d14"]));
        assert!(r.affected_nodes.iter().all(|i| i.severity == Severity::Affected));
    }

    #[test]
    fn upward_is_review() {
        let p = fixtures::r1_selected(&["n1", "n7", "n3"]);
        let r = impact_of_node_change(&p, "n8", Direction::Up).unwrap();
        assert_eq!(set(r.node_ids()), ids(&["n3", "m"]));
        assert!(r.affected_nodes.iter().all(|i| i.severity == Severity::Review));
        assert_eq!(set(r.capability_ids()), ids(&["n3"]));
        let both = impact_of_node_change(&p, "n8", Direction::Both).unwrap();
        assert_eq!(set(both.node_ids()), ids(&["n3", "m"]));
        assert_eq!(set(both.directive_ids()), ids(&["d10", "d11", "d12"]));
    }

    #[test]
    fn leaf_change_touches_only_its_requirements() {
        let p = fully_transformed();
        let r = impact_of_node_change(&p, "d1", Direction::Down).unwrap();
        assert!(r.affected_nodes.is_empty() && r.affected_directives.is_empty());
        assert_eq!(set(r.requirement_ids()), ids(&["d1-r1"]));
    }

    #[test]
    fn shared_directive_flags_both_capabilities() {
        let p = fixtures::r2_selected(&["n1", "n7", "n3"]);
        let r = impact_of_node_change(&p, "n7", Direction::Down).unwrap();
        assert!(r.directive_ids().contains("d9"));
        assert!(r.capability_ids().contains("n3"));

        let r = impact_of_directive_change(&p, "d9").unwrap();
        assert_eq!(set(r.capability_ids()), ids(&["n3", "n7"]));
    }

    #[test]
    fn directive_weight_is_relevance() {
        let p = fixtures::r1_selected(&["n1", "n7", "n3"])
            .apply(Mutation::SetRelevance { directive: "d7".into(), relevance: 0.7, category: None })
            .unwrap();
        let r = impact_of_directive_change(&p, "d7").unwrap();
        assert_eq!(r.affected_capabilities.len(), 1);
        assert_eq!(r.affected_capabilities[0].id, "n7");
        assert_eq!(r.affected_capabilities[0].weight, 0.7);
        assert!(r.affected_requirements.is_empty());
    }

    #[test]
    fn capability_coupling() {
        let p = fixtures::r1_selected(&["n1", "n7", "n3"]);
        let r = impact_of_capability_change(&p, "n7").unwrap();
        assert!(r.affected_capabilities.is_empty());
        assert!(r.affected_requirements.is_empty());
        assert_eq!(set(r.directive_ids()), ids(&["d6", "d7", "d8", "d9"]));

        let p = fixtures::r2_selected(&["n1", "n7", "n3"]);
        let r = impact_of_capability_change(&p, "n7").unwrap();
        assert_eq!(r.affected_capabilities.len(), 1);
        assert_eq!(r.affected_capabilities[0].id, "n3");
        assert!((r.affected_capabilities[0].weight - 1.0 / 9.0).abs() < 1e-12);

        assert!(matches!(impact_of_capability_change(&p, "n2"), Err(TraceError::UnknownCapability(_))));
    }

    fn fully_transformed() -> Project {
        fixtures::r1_transformed(&["n1", "n7", "n3"], 1)
    }

    #[test]
    fn requirement_siblings_and_peers() {
        let p = fixtures::r1_transformed(&["n1", "n7", "n3"], 2);
        let r = impact_of_requirement_change(&p, "d6-r1").unwrap();
        let by_id: BTreeMap<&str, Severity> = r.affected_requirements.iter().map(|i| (i.id.as_str(), i.severity)).collect();
        assert_eq!(by_id["d6-r2"], Severity::Strong);
        assert_eq!(by_id["d8-r1"], Severity::Moderate);
        assert!(!by_id.contains_key("d1-r1"));
        assert!(!by_id.contains_key("d13-r1"));
        let r = impact_of_requirement_change(&p, "d13-r1").unwrap();
        assert!(!r.requirement_ids().contains("d1-r1"));
    }

    #[test]
    fn forward_from_n9_only_reaches_d13_d14() {
        let p = fixtures::r1_transformed_with_need_on(&["n1", "n7", "n3"], "n9");
        let reqs = forward_requirements(&p, "need-9").unwrap();
        assert_eq!(reqs.iter().map(|r| r.to_string()).collect::<BTreeSet<_>>(), ids(&["d13-r1", "d14-r1"]));
        for path in trace_forward(&p, "need-9").unwrap() {
            let spaces: Vec<SpaceTag> = path.steps.iter().map(|s| s.space).collect();
            assert!(spaces.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn unreferenced_need_has_no_paths() {
        let p = fixtures::r1_project()
            .apply(Mutation::AddNeed { need: crate::graph::Need::new("lonely", "text", "user") })
            .unwrap();
        assert!(trace_forward(&p, "lonely").unwrap().is_empty());
        assert!(matches!(trace_forward(&p, "nope"), Err(TraceError::UnknownNeed(_))));
    }

    #[test]
    fn backward_from_d14() {
        let p = fully_transformed();
        let b = trace_backward(&p, "d14-r1").unwrap();
        assert_eq!(b.ancestry, vec![NodeId::from("n9"), "n3".into(), "m".into()]);
        assert_eq!(b.needs, vec![NeedId::from("need-1")]);
        assert_eq!(b.capabilities, vec![NodeId::from("n3")]);
        let path = &b.paths[0];
        assert_eq!(path.steps[0].entity, EntityRef::Requirement("d14-r1".into()));
        assert_eq!(path.last(), Some(&EntityRef::Need("need-1".into())));
    }

    #[test]
    fn orphan_has_no_source_need() {
        let p = fully_transformed();
        let p = p.apply(Mutation::RemoveNode { id: "d6".into() }).unwrap();
        assert_eq!(trace_backward(&p, "d6-r1"), Err(TraceError::NoSourceNeed("d6-r1".into())));
    }

    #[test]
    fn neighborhoods() {
        let p = fixtures::r1_with_needs(&[("a", "n3"), ("b", "n8"), ("c", "n1"), ("d", "n9")]);
        let names = |n: &str| -> BTreeSet<String> {
            need_neighborhood(&p, n).unwrap().into_iter().map(|x| x.need.to_string()).collect()
        };
        assert!(names("a").contains("b"));
        assert!(names("b").contains("a"));
        assert!(!names("c").contains("d"));
        assert!(!names("d").contains("c"));
        let all: BTreeSet<String> = p.needs().keys().filter(|n| n.as_str() != "need-1").map(|n| n.to_string()).collect();
        assert_eq!(names("need-1"), all);
    }

    #[test]
    fn critical_thresholds() {
        let p = fixtures::r1_transformed(&["n1", "n7", "n3"], 1)
            .apply(Mutation::SetRelevance { directive: "d1".into(), relevance: 0.4, category: None })
            .unwrap();
        let all = all_links(&p).len();
        assert_eq!(critical_traces(&p, 0.0).unwrap().len(), all);
        let top = critical_traces(&p, 1.0).unwrap();
        assert!(!top.contains(&TraceLink {
            from: EntityRef::Directive("d1".into()),
            to: EntityRef::Requirement("d1-r1".into()),
            kind: LinkKind::Transformation,
        }));
        assert!(top.len() < all);
        assert!(critical_traces(&p, 1.5).is_err());
    }

    #[test]
    fn matrix_rows() {
        let p = fully_transformed();
        let rows = trace_matrix(&p);
        assert_eq!(rows.len(), 14);
        assert!(rows.windows(2).all(|w| w[0] <= w[1]));
        let csv = matrix_csv(&rows);
        assert!(csv.starts_with("need_id,node_id,directive_id,capability_id,requirement_id,relevance\n"));
        assert_eq!(csv.lines().count(), 15);
        assert!(!csv.contains('\r'));

        let empty = matrix_csv(&trace_matrix(&fixtures::r1_project()));
        assert_eq!(empty, "need_id,node_id,directive_id,capability_id,requirement_id,relevance\n");
    }
}
