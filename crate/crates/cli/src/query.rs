//! Queries shared by the CLI and the HTTP API. Each returns the exact bytes
//! both front ends emit, so their outputs cannot drift apart.

use std::collections::BTreeMap;

use capweave_core::trace::{forward_requirements, impact_of_need_change};
use capweave_core::{
    validate_transformation,
    enumerate_candidates, impact_of_capability_change, impact_of_directive_change, impact_of_node_change,
    impact_of_requirement_change, optimize, rank_candidates, to_canonical_json, trace_backward, trace_forward,
    CapabilitySet, Constraints, Direction, EnumerationLimits, ImpactReport, NeedId, NodeKind, OptimizedSelection,
    Project, RequirementId, ScoreWeights, Strategy, TracePath, TransformationReport,
};
use serde::{Deserialize, Serialize};

use crate::error::ShellError;

/// Parses `cohesion,coupling,abstraction`.
pub fn parse_weights(text: &str) -> Result<ScoreWeights, ShellError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| ShellError::usage(format!("weights `{text}`: {e}")))?;
    let [c, k, a] = parts[..] else {
        return Err(ShellError::usage(format!("weights `{text}` must have three comma-separated values")));
    };
    ScoreWeights::new(c, k, a).map_err(|e| ShellError::usage(e.to_string()))
}

/// Ranked candidates under the given strategy, or the automatic one.
pub fn candidates(
    project: &Project,
    strategy: Option<Strategy>,
    weights: Option<ScoreWeights>,
) -> Result<Vec<CapabilitySet>, ShellError> {
    let weights = weights.unwrap_or(*project.weights());
    let mut limits = EnumerationLimits::auto(project.graph());
    if let Some(s) = strategy {
        limits.strategy = s;
    }
    let found = enumerate_candidates(project.graph(), &limits, &weights)?;
    Ok(rank_candidates(found, &weights)?)
}

pub fn formulate(project: &Project, strategy: Option<Strategy>, weights: Option<ScoreWeights>) -> Result<String, ShellError> {
    Ok(to_canonical_json(&candidates(project, strategy, weights)?))
}

/// Picks and plans the best candidate under `constraints` with the project's
/// weights. Nothing is recorded.
pub fn select(project: &Project, constraints: &Constraints) -> Result<OptimizedSelection, ShellError> {
    constraints.check()?;
    let ranked = candidates(project, None, None)?;
    Ok(optimize(project.graph(), &ranked, constraints)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Need,
    Node,
    Directive,
    Capability,
    Requirement,
}

/// Body of an impact request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactQuery {
    pub entity: String,
    #[serde(default)]
    pub direction: Option<Direction>,
    /// Overrides the kind inferred from the id.
    #[serde(default)]
    pub kind: Option<EntityKind>,
}

/// Infers what an id names: requirement, need, directive, then any node.
pub fn resolve(project: &Project, id: &str) -> Result<EntityKind, ShellError> {
    if project.requirements().contains_key(id) {
        return Ok(EntityKind::Requirement);
    }
    if project.needs().contains_key(id) {
        return Ok(EntityKind::Need);
    }
    match project.graph().node(id).map(|n| n.kind) {
        Some(NodeKind::Directive) => Ok(EntityKind::Directive),
        Some(_) => Ok(EntityKind::Node),
        None => Err(ShellError::not_found(format!("unknown entity `{id}`"))),
    }
}

pub fn impact_report(project: &Project, q: &ImpactQuery) -> Result<ImpactReport, ShellError> {
    let kind = match q.kind {
        Some(k) => k,
        None => resolve(project, &q.entity)?,
    };
    let id = q.entity.as_str();
    let direction = q.direction.unwrap_or(Direction::Down);
    let report = match kind {
        EntityKind::Need => impact_of_need_change(project, id)?,
        EntityKind::Node => impact_of_node_change(project, id, direction)?,
        EntityKind::Directive if q.direction.is_some() => impact_of_node_change(project, id, direction)?,
        EntityKind::Directive => impact_of_directive_change(project, id)?,
        EntityKind::Capability => impact_of_capability_change(project, id)?,
        EntityKind::Requirement => impact_of_requirement_change(project, id)?,
    };
    Ok(report)
}

pub fn impact(project: &Project, q: &ImpactQuery) -> Result<String, ShellError> {
    Ok(to_canonical_json(&impact_report(project, q)?))
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ForwardTrace {
    pub need: NeedId,
    pub paths: Vec<TracePath>,
    pub requirements: Vec<RequirementId>,
}

/// Forward trace from a need, or backward trace from a requirement.
pub fn trace(project: &Project, entity: &str, backward: bool) -> Result<String, ShellError> {
    if backward {
        return Ok(to_canonical_json(&trace_backward(project, entity)?));
    }
    let paths = trace_forward(project, entity)?;
    let requirements = forward_requirements(project, entity)?.into_iter().collect();
    Ok(to_canonical_json(&ForwardTrace {
        need: entity.into(),
        paths,
        requirements,
    }))
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct GraphView<'a> {
    fingerprint: &'a str,
    depth: u32,
    nodes: &'a [capweave_core::FdNode],
    edges: &'a [capweave_core::Edge],
    levels: BTreeMap<&'a str, u32>,
}

pub fn graph(project: &Project) -> String {
    let g = project.graph();
    let levels = g
        .nodes()
        .iter()
        .map(|n| (n.id.as_str(), g.abstraction_level(n.id.as_str()).expect("own node")))
        .collect();
    to_canonical_json(&GraphView {
        fingerprint: g.fingerprint(),
        depth: g.depth(),
        nodes: g.nodes(),
        edges: g.edges(),
        levels,
    })
}

#[derive(Debug, Clone, Serialize)]
struct ValidationOutput<'a> {
    violations: &'a [capweave_core::Violation],
    #[serde(skip_serializing_if = "Option::is_none")]
    transformation: Option<TransformationReport>,
}

/// Structural violations, or the transformation report of a valid project.
pub fn validation(result: &Result<Project, capweave_core::StoreError>) -> String {
    match result {
        Ok(p) => to_canonical_json(&ValidationOutput {
            violations: &[],
            transformation: Some(validate_transformation(p)),
        }),
        Err(capweave_core::StoreError::Validation(v)) => to_canonical_json(&ValidationOutput {
            violations: v,
            transformation: None,
        }),
        Err(_) => to_canonical_json(&ValidationOutput {
            violations: &[],
            transformation: None,
        }),
    }
}

pub fn error_body(e: &ShellError) -> String {
    #[derive(Serialize)]
    struct Body<'a> {
        error: &'a ShellError,
    }
    to_canonical_json(&Body { error: e })
}
