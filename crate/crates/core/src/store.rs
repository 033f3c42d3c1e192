//! Project aggregate, canonical `.capweave.json` documents, transactional
//! mutations and the single-writer store used by the CLI and HTTP API.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::formulation::{CapabilitySet, FormulationError};
use crate::graph::{validate_graph, Edge, FdGraph, FdNode, Need, NeedStatus, NodeKind, RiskCategory, Violation, ViolationCode};
use crate::ids::{NeedId, NodeId, RequirementId};
use crate::metrics::ScoreWeights;
use crate::optimization::{plan, Constraints, OptimizeError, OptimizedSelection};
use crate::transformation::{transform_capability, Drafts, Requirement, RequirementStatus, TransformError};

/// Value of the `formatVersion` field this build reads and writes.
pub const FORMAT_VERSION: &str = "1";

/// Conventional project file suffix.
pub const FILE_SUFFIX: &str = ".capweave.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation failed: {}", join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("unknown {kind} `{id}`")]
    UnknownEntity { kind: &'static str, id: String },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl StoreError {
    fn unknown(kind: &'static str, id: impl Into<String>) -> Self {
        StoreError::UnknownEntity { kind, id: id.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectMeta {
    pub name: String,
    pub version: u64,
    pub problem_domain: String,
    pub solution_domain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditEntry {
    pub version: u64,
    pub timestamp: String,
    pub kind: String,
    pub entities: Vec<String>,
}

/// Serialized form of a project. Field names are the file's section names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProjectDocument {
    pub format_version: String,
    pub meta: ProjectMeta,
    pub needs: Vec<Need>,
    pub nodes: Vec<FdNode>,
    pub edges: Vec<Edge>,
    pub weights: ScoreWeights,
    pub constraints: Constraints,
    pub selection: Option<OptimizedSelection>,
    pub requirements: Vec<Requirement>,
    #[serde(default)]
    pub audit_log: Vec<AuditEntry>,
}

/// A state change applied through [`Project::apply`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Mutation {
    AddNeed { need: Need },
    RetireNeed { id: NeedId },
    /// Adds a node together with the edges connecting it.
    AddNode { node: FdNode, edges: Vec<Edge> },
    /// Removes a node and every descendant left without a parent.
    RemoveNode { id: NodeId },
    AddEdge { edge: Edge },
    RemoveEdge { source: NodeId, target: NodeId },
    SetNeedRefs { node: NodeId, needs: BTreeSet<NeedId> },
    /// Without an explicit category the category is derived from the band.
    SetRelevance {
        directive: NodeId,
        relevance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        category: Option<RiskCategory>,
    },
    SetEffort { directive: NodeId, effort: f64 },
    #[serde(rename_all = "camelCase")]
    SetTechReadiness { directive: NodeId, tech_readiness: u8 },
    SetWeights { weights: ScoreWeights },
    SetConstraints { constraints: Constraints },
    /// Records the chosen member set, optionally with new constraints.
    RecordSelection {
        members: BTreeSet<NodeId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constraints: Option<Constraints>,
    },
    ClearSelection,
    Transform { capability: NodeId, drafts: Drafts },
    EditRequirement {
        id: RequirementId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        status: Option<RequirementStatus>,
    },
}

impl Mutation {
    pub fn kind(&self) -> &'static str {
        match self {
            Mutation::AddNeed { .. } => "addNeed",
            Mutation::RetireNeed { .. } => "retireNeed",
            Mutation::AddNode { .. } => "addNode",
            Mutation::RemoveNode { .. } => "removeNode",
            Mutation::AddEdge { .. } => "addEdge",
            Mutation::RemoveEdge { .. } => "removeEdge",
            Mutation::SetNeedRefs { .. } => "setNeedRefs",
            Mutation::SetRelevance { .. } => "setRelevance",
            Mutation::SetEffort { .. } => "setEffort",
            Mutation::SetTechReadiness { .. } => "setTechReadiness",
            Mutation::SetWeights { .. } => "setWeights",
            Mutation::SetConstraints { .. } => "setConstraints",
            Mutation::RecordSelection { .. } => "recordSelection",
            Mutation::ClearSelection => "clearSelection",
            Mutation::Transform { .. } => "transform",
            Mutation::EditRequirement { .. } => "editRequirement",
        }
    }
}

/// The persistent aggregate. Every `Project` value satisfies the graph
/// rules and referential integrity; changes go through [`Project::apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    meta: ProjectMeta,
    needs: BTreeMap<NeedId, Need>,
    graph: FdGraph,
    weights: ScoreWeights,
    constraints: Constraints,
    selection: Option<OptimizedSelection>,
    requirements: BTreeMap<RequirementId, Requirement>,
    audit_log: Vec<AuditEntry>,
}

/// Mutable working copy used while validating or applying changes.
struct Parts {
    meta: ProjectMeta,
    needs: Vec<Need>,
    nodes: Vec<FdNode>,
    edges: Vec<Edge>,
    weights: ScoreWeights,
    constraints: Constraints,
    selection: Option<OptimizedSelection>,
    requirements: Vec<Requirement>,
    audit_log: Vec<AuditEntry>,
}

#[derive(PartialEq)]
enum SelectionMode {
    /// The stored selection must equal the one derived from its members.
    Verify,
    /// Re-derive from the members; drop it if that is no longer possible.
    Refresh,
    /// Re-derive from the members; failure rejects the change.
    Require,
}

fn violation(code: ViolationCode, message: impl Into<String>) -> Violation {
    Violation {
        code,
        nodes: Vec::new(),
        edges: Vec::new(),
        message: message.into(),
    }
}

impl Project {
    /// Creates a project at version 0 with default weights and constraints.
    pub fn new(
        name: impl Into<String>,
        problem_domain: impl Into<String>,
        solution_domain: impl Into<String>,
        needs: Vec<Need>,
        graph: FdGraph,
    ) -> Result<Self, StoreError> {
        Self::assemble(
            Parts {
                meta: ProjectMeta {
                    name: name.into(),
                    version: 0,
                    problem_domain: problem_domain.into(),
                    solution_domain: solution_domain.into(),
                },
                needs,
                nodes: graph.nodes().to_vec(),
                edges: graph.edges().to_vec(),
                weights: ScoreWeights::default(),
                constraints: Constraints::default(),
                selection: None,
                requirements: Vec::new(),
                audit_log: Vec::new(),
            },
            SelectionMode::Verify,
        )
        .map(|(p, _)| p)
    }

    pub fn meta(&self) -> &ProjectMeta {
        &self.meta
    }

    pub fn version(&self) -> u64 {
        self.meta.version
    }

    pub fn needs(&self) -> &BTreeMap<NeedId, Need> {
        &self.needs
    }

    pub fn graph(&self) -> &FdGraph {
        &self.graph
    }

    pub fn weights(&self) -> &ScoreWeights {
        &self.weights
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn selection(&self) -> Option<&OptimizedSelection> {
        self.selection.as_ref()
    }

    pub fn requirements(&self) -> &BTreeMap<RequirementId, Requirement> {
        &self.requirements
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        &self.audit_log
    }

    pub fn to_document(&self) -> ProjectDocument {
        ProjectDocument {
            format_version: FORMAT_VERSION.to_owned(),
            meta: self.meta.clone(),
            needs: self.needs.values().cloned().collect(),
            nodes: self.graph.nodes().to_vec(),
            edges: self.graph.edges().to_vec(),
            weights: self.weights,
            constraints: self.constraints,
            selection: self.selection.clone(),
            requirements: self.requirements.values().cloned().collect(),
            audit_log: self.audit_log.clone(),
        }
    }

    /// Validates a document into a project. Every problem found is reported.
    pub fn from_document(doc: ProjectDocument) -> Result<Self, StoreError> {
        if doc.format_version != FORMAT_VERSION {
            return Err(StoreError::Validation(vec![violation(
                ViolationCode::UnsupportedFormat,
                format!("formatVersion `{}` is not supported (expected `{FORMAT_VERSION}`)", doc.format_version),
            )]));
        }
        let parts = Parts {
            meta: doc.meta,
            needs: doc.needs,
            nodes: doc.nodes,
            edges: doc.edges,
            weights: doc.weights,
            constraints: doc.constraints,
            selection: doc.selection,
            requirements: doc.requirements,
            audit_log: doc.audit_log,
        };
        Self::assemble(parts, SelectionMode::Verify).map(|(p, _)| p)
    }

    /// Parses and validates a project document.
    pub fn load(bytes: &[u8]) -> Result<Self, StoreError> {
        let doc: ProjectDocument = serde_json::from_slice(bytes).map_err(|e| StoreError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_document(doc)
    }

    /// Canonical bytes: sorted keys, two-space indentation, trailing newline.
    pub fn save(&self) -> Vec<u8> {
        to_canonical_json(&self.to_document()).into_bytes()
    }

    fn into_parts(self) -> Parts {
        Parts {
            meta: self.meta,
            needs: self.needs.into_values().collect(),
            nodes: self.graph.nodes().to_vec(),
            edges: self.graph.edges().to_vec(),
            weights: self.weights,
            constraints: self.constraints,
            selection: self.selection,
            requirements: self.requirements.into_values().collect(),
            audit_log: self.audit_log,
        }
    }

    fn assemble(parts: Parts, mode: SelectionMode) -> Result<(Self, bool), StoreError> {
        let Parts {
            meta,
            needs,
            nodes,
            edges,
            weights,
            constraints,
            selection,
            requirements,
            audit_log,
        } = parts;
        let mut problems = validate_graph(&nodes, &edges).violations;

        let mut need_map = BTreeMap::new();
        for need in needs {
            if need.text.trim().is_empty() {
                problems.push(violation(ViolationCode::EmptyText, format!("need `{}` has empty text", need.id)));
            }
            if let Some(dup) = need_map.insert(need.id.clone(), need) {
                problems.push(violation(ViolationCode::DuplicateId, format!("need id `{}` is not unique", dup.id)));
            }
        }
        for node in &nodes {
            for need in &node.need_refs {
                if !need_map.contains_key(need) {
                    problems.push(Violation::node(
                        ViolationCode::UnknownNeedRef,
                        &node.id,
                        format!("node `{}` references unknown need `{need}`", node.id),
                    ));
                }
            }
        }
        if let Err(e) = weights.check() {
            problems.push(violation(ViolationCode::InvalidSettings, e.to_string()));
        }
        if let Err(e) = constraints.check() {
            problems.push(violation(ViolationCode::InvalidSettings, e.to_string()));
        }
        let mut req_map = BTreeMap::new();
        for req in requirements {
            if req.text.trim().is_empty() {
                problems.push(violation(ViolationCode::EmptyText, format!("requirement `{}` has empty text", req.id)));
            }
            if !(0.0..=1.0).contains(&req.criticality) {
                problems.push(violation(
                    ViolationCode::InvalidRequirement,
                    format!("requirement `{}` criticality {} outside [0,1]", req.id, req.criticality),
                ));
            }
            if let Some(dup) = req_map.insert(req.id.clone(), req) {
                problems.push(violation(ViolationCode::DuplicateId, format!("requirement id `{}` is not unique", dup.id)));
            }
        }
        if !problems.is_empty() {
            return Err(StoreError::Validation(problems));
        }

        let graph = FdGraph::build(nodes, edges).map_err(|e| match e {
            crate::graph::GraphError::Invalid(r) => StoreError::Validation(r.violations),
            other => StoreError::Validation(vec![violation(ViolationCode::CycleDetected, other.to_string())]),
        })?;

        let mut cleared = false;
        let selection = match selection {
            None => None,
            Some(stored) => {
                let derived = derive_selection(&graph, &stored.chosen_set.members, &weights, &constraints);
                match (mode, derived) {
                    (SelectionMode::Verify, Ok(d)) if d == stored => Some(d),
                    (SelectionMode::Verify, Ok(_)) => {
                        return Err(StoreError::Validation(vec![violation(
                            ViolationCode::SelectionInconsistent,
                            "stored selection differs from the one derived from its members",
                        )]))
                    }
                    (SelectionMode::Verify, Err(e)) => {
                        return Err(StoreError::Validation(vec![violation(
                            ViolationCode::SelectionInconsistent,
                            format!("stored selection is not valid for this project: {e}"),
                        )]))
                    }
                    (SelectionMode::Refresh, Ok(d)) | (SelectionMode::Require, Ok(d)) => Some(d),
                    (SelectionMode::Refresh, Err(_)) => {
                        cleared = true;
                        None
                    }
                    (SelectionMode::Require, Err(e)) => return Err(e),
                }
            }
        };

        Ok((
            Self {
                meta,
                needs: need_map,
                graph,
                weights,
                constraints,
                selection,
                requirements: req_map,
                audit_log,
            },
            cleared,
        ))
    }

    /// Applies a mutation, stamping the audit entry with the current time.
    pub fn apply(&self, mutation: Mutation) -> Result<Project, StoreError> {
        let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        self.apply_at(mutation, &now)
    }

    /// Applies a mutation and returns the next version. `self` is never
    /// modified, so a failed mutation leaves the prior version untouched.
    pub fn apply_at(&self, mutation: Mutation, timestamp: &str) -> Result<Project, StoreError> {
        let kind = mutation.kind();
        let mut parts = self.clone().into_parts();
        let mut mode = SelectionMode::Refresh;
        let mut entities: Vec<String> = Vec::new();

        match mutation {
            Mutation::AddNeed { need } => {
                entities.push(need.id.to_string());
                parts.needs.push(need);
            }
            Mutation::RetireNeed { id } => {
                let need = parts
                    .needs
                    .iter_mut()
                    .find(|n| n.id == id)
                    .ok_or_else(|| StoreError::unknown("need", id.as_str()))?;
                need.status = NeedStatus::Retired;
                entities.push(id.to_string());
            }
            Mutation::AddNode { node, edges } => {
                entities.push(node.id.to_string());
                parts.nodes.push(node);
                parts.edges.extend(edges);
            }
            Mutation::RemoveNode { id } => {
                if !self.graph.contains(id.as_str()) {
                    return Err(StoreError::unknown("node", id.as_str()));
                }
                let removed = cascade(&self.graph, &id);
                parts.nodes.retain(|n| !removed.contains(&n.id));
                parts
                    .edges
                    .retain(|e| !removed.contains(&e.source) && !removed.contains(&e.target));
                entities.extend(removed.iter().map(ToString::to_string));
            }
            Mutation::AddEdge { edge } => {
                entities.push(format!("{}->{}", edge.source, edge.target));
                parts.edges.push(edge);
            }
            Mutation::RemoveEdge { source, target } => {
                let before = parts.edges.len();
                parts.edges.retain(|e| !(e.source == source && e.target == target));
                if parts.edges.len() == before {
                    return Err(StoreError::unknown("edge", format!("{source}->{target}")));
                }
                entities.push(format!("{source}->{target}"));
            }
            Mutation::SetNeedRefs { node, needs } => {
                let target = parts
                    .nodes
                    .iter_mut()
                    .find(|n| n.id == node)
                    .ok_or_else(|| StoreError::unknown("node", node.as_str()))?;
                target.need_refs = needs;
                entities.push(node.to_string());
            }
            Mutation::SetRelevance {
                directive,
                relevance,
                category,
            } => {
                let d = directive_mut(&mut parts.nodes, &directive)?;
                d.relevance = relevance;
                d.risk_category = category
                    .or_else(|| RiskCategory::for_relevance(relevance))
                    .unwrap_or(d.risk_category);
                entities.push(directive.to_string());
            }
            Mutation::SetEffort { directive, effort } => {
                directive_mut(&mut parts.nodes, &directive)?.effort = effort;
                entities.push(directive.to_string());
            }
            Mutation::SetTechReadiness {
                directive,
                tech_readiness,
            } => {
                directive_mut(&mut parts.nodes, &directive)?.tech_readiness = tech_readiness;
                entities.push(directive.to_string());
            }
            Mutation::SetWeights { weights } => {
                parts.weights = weights;
            }
            Mutation::SetConstraints { constraints } => {
                parts.constraints = constraints;
            }
            Mutation::RecordSelection { members, constraints } => {
                for m in &members {
                    if !self.graph.contains(m.as_str()) {
                        return Err(StoreError::unknown("node", m.as_str()));
                    }
                }
                if let Some(c) = constraints {
                    parts.constraints = c;
                }
                c_check(&parts)?;
                let selection = derive_selection(&self.graph, &members, &parts.weights, &parts.constraints)?;
                entities.extend(members.iter().map(ToString::to_string));
                parts.selection = Some(selection);
                mode = SelectionMode::Require;
            }
            Mutation::ClearSelection => {
                parts.selection = None;
            }
            Mutation::Transform { capability, drafts } => {
                let created = transform_capability(self, capability.as_str(), &drafts)?;
                entities.push(capability.to_string());
                entities.extend(created.iter().map(|r| r.id.to_string()));
                parts.requirements.extend(created);
            }
            Mutation::EditRequirement { id, text, status } => {
                let req = parts
                    .requirements
                    .iter_mut()
                    .find(|r| r.id == id)
                    .ok_or_else(|| StoreError::unknown("requirement", id.as_str()))?;
                if let Some(t) = text {
                    req.text = t;
                }
                if let Some(s) = status {
                    req.status = s;
                }
                entities.push(id.to_string());
            }
        }

        parts.meta.version = self.meta.version + 1;
        let (mut project, cleared) = Self::assemble(parts, mode)?;
        if cleared {
            entities.push("selection:cleared".to_owned());
        }
        project.audit_log.push(AuditEntry {
            version: project.meta.version,
            timestamp: timestamp.to_owned(),
            kind: kind.to_owned(),
            entities,
        });
        Ok(project)
    }
}

fn c_check(parts: &Parts) -> Result<(), StoreError> {
    parts.constraints.check()?;
    parts.weights.check().map_err(FormulationError::from)?;
    Ok(())
}

fn directive_mut<'a>(nodes: &'a mut [FdNode], id: &NodeId) -> Result<&'a mut crate::graph::Directive, StoreError> {
    nodes
        .iter_mut()
        .find(|n| &n.id == id && n.kind == NodeKind::Directive)
        .and_then(|n| n.directive.as_mut())
        .ok_or_else(|| StoreError::unknown("directive", id.as_str()))
}

/// `id` plus every descendant whose parents are all removed.
fn cascade(graph: &FdGraph, id: &NodeId) -> BTreeSet<NodeId> {
    let mut removed = BTreeSet::from([id.clone()]);
    let below = graph
        .descendants(id.as_str(), &crate::graph::EdgeKind::ALL)
        .expect("node exists");
    for v in graph.topological_order() {
        if !below.contains(v) {
            continue;
        }
        let parents = graph.parents(v.as_str()).expect("node exists");
        if parents.iter().all(|(p, _)| removed.contains(*p)) {
            removed.insert(v.clone());
        }
    }
    removed
}

/// Scores and plans a member set against the project's settings.
pub fn derive_selection(
    graph: &FdGraph,
    members: &BTreeSet<NodeId>,
    weights: &ScoreWeights,
    constraints: &Constraints,
) -> Result<OptimizedSelection, StoreError> {
    let set = CapabilitySet::new(graph, members.clone(), weights)?;
    Ok(plan(graph, &set, constraints)?)
}

/// Parses and validates project bytes.
pub fn load_project(bytes: &[u8]) -> Result<Project, StoreError> {
    Project::load(bytes)
}

/// Canonical serialization of a project.
pub fn save_project(project: &Project) -> Vec<u8> {
    project.save()
}

/// Applies one mutation, producing the next project version.
pub fn apply_mutation(project: &Project, mutation: Mutation) -> Result<Project, StoreError> {
    project.apply(mutation)
}

/// Trace matrix as CSV: fixed header, one line per row, LF endings.
pub fn export_matrix(project: &Project) -> String {
    crate::trace::matrix_csv(&crate::trace::trace_matrix(project))
}

/// Renders any serializable value as canonical JSON: object keys sorted,
/// two-space indentation, LF line endings and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("serializable value");
    let mut out = serde_json::to_string_pretty(&sort_keys(value)).expect("json value");
    out.push('\n');
    out
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Single-writer, multi-reader holder of the current project version.
///
/// Readers take cheap `Arc` snapshots and never wait on each other. Writers
/// are serialized; a commit validates the mutation, persists the new version
/// (when the store is file-backed) and only then publishes it.
#[derive(Debug)]
pub struct ProjectStore {
    current: RwLock<Arc<Project>>,
    writer: Mutex<()>,
    path: Option<PathBuf>,
}

impl ProjectStore {
    pub fn in_memory(project: Project) -> Self {
        Self {
            current: RwLock::new(Arc::new(project)),
            writer: Mutex::new(()),
            path: None,
        }
    }

    /// Loads a file-backed store; commits are written back to `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let project = read_project(&path)?;
        Ok(Self {
            current: RwLock::new(Arc::new(project)),
            writer: Mutex::new(()),
            path: Some(path),
        })
    }

    pub fn snapshot(&self) -> Arc<Project> {
        self.current.read().expect("store lock poisoned").clone()
    }

    pub fn commit(&self, mutation: Mutation) -> Result<Arc<Project>, StoreError> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let next = Arc::new(self.snapshot().apply(mutation)?);
        if let Some(path) = &self.path {
            write_project(path, &next)?;
        }
        *self.current.write().expect("store lock poisoned") = next.clone();
        Ok(next)
    }
}

pub fn read_project(path: &Path) -> Result<Project, StoreError> {
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Project::load(&bytes)
}

/// Writes canonical bytes via a temporary file and rename.
pub fn write_project(path: &Path, project: &Project) -> Result<(), StoreError> {
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(io)?;
    file.write_all(&project.save()).map_err(io)?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
