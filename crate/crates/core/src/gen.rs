//! Random valid graphs and projects for property tests and benchmarks.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::formulation::{enumerate_candidates, EnumerationLimits};
use crate::graph::{Directive, Edge, EdgeKind, FdGraph, FdNode, Need, NodeKind, RiskCategory};
use crate::ids::NodeId;
use crate::metrics::ScoreWeights;
use crate::optimization::Constraints;
use crate::store::{Mutation, Project};
use crate::transformation::Drafts;

#[derive(Debug, Clone, Copy)]
pub struct GraphShape {
    /// Upper bound on functional nodes (the mission is not counted).
    pub max_internal: usize,
    pub max_fanout: usize,
    /// Chance that an internal node refines instead of decomposes.
    pub refinement_rate: f64,
    /// Number of extra intersection edges to attempt.
    pub intersections: usize,
}

impl Default for GraphShape {
    fn default() -> Self {
        Self {
            max_internal: 10,
            max_fanout: 4,
            refinement_rate: 0.2,
            intersections: 2,
        }
    }
}

pub fn random_directive<R: Rng>(rng: &mut R) -> Directive {
    let category = *RiskCategory::ALL.choose(rng).expect("non-empty");
    let relevance = match category {
        RiskCategory::Catastrophic => rng.gen_range(0.85..=1.0),
        RiskCategory::Critical => rng.gen_range(0.6..0.85),
        RiskCategory::Marginal => rng.gen_range(0.3..0.6),
        RiskCategory::Negligible => rng.gen_range(0.0..0.3),
    };
    Directive {
        relevance,
        risk_category: category,
        effort: f64::from(rng.gen_range(1u32..=20)),
        tech_readiness: rng.gen_range(1..=9),
    }
}

/// A random graph that satisfies every structural rule.
pub fn random_graph<R: Rng>(rng: &mut R, shape: &GraphShape) -> FdGraph {
    let budget = rng.gen_range((shape.max_internal / 3).max(1)..=shape.max_internal.max(1));
    let mut nodes = vec![FdNode::mission("m", "mission").with_needs(["need-1"])];
    let mut edges: Vec<Edge> = Vec::new();
    let mut open = VecDeque::from([NodeId::from("m")]);
    let (mut internal, mut directives) = (0usize, 0usize);

    while let Some(parent) = open.pop_front() {
        let is_root = parent.as_str() == "m";
        let refine = if is_root { budget == 1 } else { rng.gen_bool(shape.refinement_rate) };
        let (kind, count) = if refine {
            (EdgeKind::Refinement, 1)
        } else if is_root {
            (EdgeKind::Decomposition, rng.gen_range(2..=shape.max_fanout.max(2)).min(budget))
        } else {
            (EdgeKind::Decomposition, rng.gen_range(2..=shape.max_fanout.max(2)))
        };
        for _ in 0..count {
            // The mission's children are always functional, so a covering
            // antichain exists.
            let id = if internal < budget && (is_root || rng.gen_bool(0.6)) {
                internal += 1;
                let id = NodeId::new(format!("n{internal}"));
                nodes.push(FdNode::functional(id.clone(), format!("function {id}")));
                open.push_back(id.clone());
                id
            } else {
                directives += 1;
                let id = NodeId::new(format!("d{directives}"));
                nodes.push(FdNode::directive(id.clone(), format!("directive {id}"), random_directive(rng)));
                id
            };
            edges.push(Edge::new(parent.clone(), id, kind));
        }
    }

    let refining: BTreeSet<NodeId> = edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Refinement)
        .map(|e| e.source.clone())
        .collect();
    let sources: Vec<NodeId> = nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Functional && !refining.contains(&n.id))
        .map(|n| n.id.clone())
        .collect();
    let targets: Vec<NodeId> = nodes.iter().filter(|n| n.kind != NodeKind::Mission).map(|n| n.id.clone()).collect();
    for _ in 0..shape.intersections {
        let (Some(s), Some(t)) = (sources.choose(rng), targets.choose(rng)) else {
            break;
        };
        if s == t || edges.iter().any(|e| &e.source == s && &e.target == t) || reaches(&edges, t, s) {
            continue;
        }
        edges.push(Edge::new(s.clone(), t.clone(), EdgeKind::Intersection));
    }
    FdGraph::build(nodes, edges).expect("generated graph is valid")
}

fn reaches(edges: &[Edge], from: &NodeId, to: &NodeId) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if seen.insert(v) {
            stack.extend(edges.iter().filter(|e| &e.source == v).map(|e| &e.target));
        }
    }
    false
}

const TEXTS: [&str; 5] = [
    "The system shall log every change",
    "Operators must confirm \"critical\" actions",
    "Réponse en moins de 2 s, même en charge",
    "Data is exported as CSV, UTF-8, with a header",
    "Only designated roles may edit; others read",
];

/// A random project: random graph, extra needs, random weights, and
/// usually a recorded selection with some transformed capabilities.
pub fn random_project<R: Rng>(rng: &mut R, shape: &GraphShape) -> Project {
    let graph = random_graph(rng, shape);
    let mut project = Project::new("random", "problem domain", "solution domain", vec![Need::new("need-1", "root need", "user")], graph)
        .expect("generated project is valid");
    let t = crate::fixtures::FIXTURE_TIME;

    let ids: Vec<NodeId> = project.graph().nodes().iter().map(|n| n.id.clone()).collect();
    for i in 2..=rng.gen_range(1..=3) {
        let need = format!("need-{i}");
        project = project
            .apply_at(Mutation::AddNeed { need: Need::new(need.as_str(), format!("need {i}"), "user") }, t)
            .expect("new need");
        let node = ids.choose(rng).expect("non-empty graph").clone();
        let mut refs = project.graph().node(node.as_str()).expect("node exists").need_refs.clone();
        refs.insert(need.into());
        project = project.apply_at(Mutation::SetNeedRefs { node, needs: refs }, t).expect("need ref");
    }

    if rng.gen_bool(0.5) {
        let w = ScoreWeights::new(rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0), rng.gen_range(0.0..1.0)).expect("positive weights");
        project = project.apply_at(Mutation::SetWeights { weights: w }, t).expect("weights");
    }

    if rng.gen_bool(0.8) {
        let limits = EnumerationLimits::auto(project.graph());
        if let Ok(candidates) = enumerate_candidates(project.graph(), &limits, project.weights()) {
            let pick = candidates.choose(rng).expect("non-empty").members.clone();
            let constraints = Constraints::new(0.0, rng.gen_range(1..=4)).expect("valid constraints");
            let record = |c: Constraints| Mutation::RecordSelection { members: pick.clone(), constraints: Some(c) };
            project = project
                .apply_at(record(constraints), t)
                .or_else(|_| project.apply_at(record(Constraints::unbounded()), t))
                .expect("unbounded plan");
            let selection = project.selection().expect("recorded").clone();
            for (member, owned) in &selection.chosen_set.assignment {
                if !selection.is_feasible(member.as_str()) || rng.gen_bool(0.3) {
                    continue;
                }
                let drafts: Drafts = owned
                    .iter()
                    .filter(|d| !project.requirements().values().any(|r| &r.source_directive_id == *d))
                    .map(|d| {
                        let n = rng.gen_range(1..=2);
                        (d.clone(), (0..n).map(|_| TEXTS.choose(rng).expect("non-empty").to_string()).collect())
                    })
                    .collect();
                project = project
                    .apply_at(Mutation::Transform { capability: member.clone(), drafts }, t)
                    .expect("feasible member");
            }
        }
    }
    project
}
