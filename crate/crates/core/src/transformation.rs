//! Directive-to-requirement transformation.
//!
//! Requirement text is always supplied by the user; this module only checks
//! the preconditions, allocates ids and records the trace links (source
//! directive, transforming capability, criticality snapshot).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{NodeId, RequirementId};
use crate::store::Project;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("no Capability set has been selected")]
    NoSelection,
    #[error("`{0}` is not a member of the chosen Capability set")]
    CapabilityNotChosen(NodeId),
    #[error("capability `{0}` is deferred and cannot be transformed yet")]
    CapabilityDeferred(NodeId),
    #[error("directive `{directive}` is not assigned to capability `{capability}`")]
    DirectiveNotInChosenCapability { directive: NodeId, capability: NodeId },
    #[error("no requirement text given for directive `{0}`")]
    EmptyRequirementList(NodeId),
    #[error("requirement text for directive `{0}` is blank")]
    BlankRequirementText(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequirementStatus {
    Draft,
    Specified,
}

/// A solution-domain statement derived from exactly one directive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Requirement {
    pub id: RequirementId,
    pub text: String,
    pub source_directive_id: NodeId,
    /// Capability the requirement was transformed under.
    pub capability_id: NodeId,
    /// Relevance of the source directive when the requirement was created.
    pub criticality: f64,
    pub status: RequirementStatus,
}

/// Directive -> requirement texts for one capability.
pub type Drafts = BTreeMap<NodeId, Vec<String>>;

fn check_capability(project: &Project, capability: &str) -> Result<(), TransformError> {
    let selection = project.selection().ok_or(TransformError::NoSelection)?;
    if !selection.chosen_set.members.contains(capability) {
        return Err(TransformError::CapabilityNotChosen(capability.into()));
    }
    if !selection.is_feasible(capability) {
        return Err(TransformError::CapabilityDeferred(capability.into()));
    }
    Ok(())
}

fn next_ids(
    taken: &BTreeSet<&str>,
    reserved: &mut BTreeSet<String>,
    directive: &str,
    count: usize,
) -> Vec<RequirementId> {
    let mut out = Vec::with_capacity(count);
    let mut n = 1usize;
    while out.len() < count {
        let candidate = format!("{directive}-r{n}");
        if !taken.contains(candidate.as_str()) && !reserved.contains(&candidate) {
            reserved.insert(candidate.clone());
            out.push(RequirementId::new(candidate));
        }
        n += 1;
    }
    out
}

fn build_requirements(
    project: &Project,
    directive: &str,
    capability: &str,
    texts: &[String],
    reserved: &mut BTreeSet<String>,
) -> Result<Vec<Requirement>, TransformError> {
    let selection = project.selection().ok_or(TransformError::NoSelection)?;
    let owns = selection
        .chosen_set
        .assignment
        .get(capability)
        .is_some_and(|dirs| dirs.contains(directive));
    if !owns {
        return Err(TransformError::DirectiveNotInChosenCapability {
            directive: directive.into(),
            capability: capability.into(),
        });
    }
    if texts.is_empty() {
        return Err(TransformError::EmptyRequirementList(directive.into()));
    }
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(TransformError::BlankRequirementText(directive.into()));
    }
    let relevance = project
        .graph()
        .directive(directive)
        .map(|d| d.relevance)
        .expect("assigned directives exist in the graph");
    let taken: BTreeSet<&str> = project.requirements().keys().map(RequirementId::as_str).collect();
    let ids = next_ids(&taken, reserved, directive, texts.len());
    Ok(ids
        .into_iter()
        .zip(texts)
        .map(|(id, text)| Requirement {
            id,
            text: text.clone(),
            source_directive_id: directive.into(),
            capability_id: capability.into(),
            criticality: relevance,
            status: RequirementStatus::Draft,
        })
        .collect())
}

/// Derives one requirement per text from a directive of a chosen, feasible
/// capability. Nothing is recorded; commit the result through the store.
pub fn transform_directive(
    project: &Project,
    directive: &str,
    capability: &str,
    texts: &[String],
) -> Result<Vec<Requirement>, TransformError> {
    check_capability(project, capability)?;
    build_requirements(project, directive, capability, texts, &mut BTreeSet::new())
}

/// Batch form of [`transform_directive`] over a capability's drafts.
pub fn transform_capability(project: &Project, capability: &str, drafts: &Drafts) -> Result<Vec<Requirement>, TransformError> {
    check_capability(project, capability)?;
    let mut reserved = BTreeSet::new();
    let mut out = Vec::new();
    for (directive, texts) in drafts {
        out.extend(build_requirements(project, directive.as_str(), capability, texts, &mut reserved)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CriticalityDrift {
    pub requirement: RequirementId,
    pub recorded: f64,
    pub current: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransformationReport {
    /// Directives of chosen feasible capabilities without any requirement.
    pub incomplete: Vec<NodeId>,
    /// Requirements whose source directive no longer exists.
    pub orphans: Vec<RequirementId>,
    pub drift: Vec<CriticalityDrift>,
}

impl TransformationReport {
    pub fn is_empty(&self) -> bool {
        self.incomplete.is_empty() && self.orphans.is_empty() && self.drift.is_empty()
    }
}

pub fn validate_transformation(project: &Project) -> TransformationReport {
    let mut report = TransformationReport::default();
    let transformed: BTreeSet<&NodeId> = project
        .requirements()
        .values()
        .map(|r| &r.source_directive_id)
        .collect();
    if let Some(selection) = project.selection() {
        let mut incomplete = BTreeSet::new();
        for (member, directives) in &selection.chosen_set.assignment {
            if !selection.is_feasible(member.as_str()) {
                continue;
            }
            incomplete.extend(directives.iter().filter(|d| !transformed.contains(d)).cloned());
        }
        report.incomplete = incomplete.into_iter().collect();
    }
    for req in project.requirements().values() {
        match project.graph().directive(req.source_directive_id.as_str()) {
            None => report.orphans.push(req.id.clone()),
            Some(d) if d.relevance != req.criticality => report.drift.push(CriticalityDrift {
                requirement: req.id.clone(),
                recorded: req.criticality,
                current: d.relevance,
            }),
            Some(_) => {}
        }
    }
    report
}
