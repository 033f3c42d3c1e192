//! Capability formulation, optimization and pre-specification traceability
//! over function decomposition (FD) graphs.
//!
//! The pipeline runs from needs captured on an FD graph, through ranked
//! candidate Capability sets and a constrained selection, to requirements
//! that keep their links back to directives and needs.

mod bitset;
pub mod fixtures;
pub mod formulation;
#[cfg(feature = "gen")]
pub mod gen;
pub mod graph;
pub mod ids;
pub mod metrics;
pub mod optimization;
pub mod store;
pub mod trace;
pub mod transformation;

pub use formulation::{
    check_candidate, compare_ranked, enumerate_candidates, is_valid_candidate, rank_candidates, CandidateCheck,
    CapabilitySet, EnumerationLimits, FormulationError, Strategy,
};
pub use graph::{
    validate_graph, Directive, Edge, EdgeKind, FdGraph, FdNode, GraphError, Need, NeedStatus, NodeKind, RiskCategory,
    SpaceTag, ValidationReport, Violation, ViolationCode,
};
pub use ids::{NeedId, NodeId, RequirementId};
pub use metrics::{abstraction_imbalance, cohesion, coupling, score_set, MetricError, ScoreWeights, SetScore};
pub use optimization::{optimize, plan, Constraints, Feasibility, Increment, IncrementIndex, OptimizeError, OptimizedSelection};
pub use store::{
    apply_mutation, export_matrix, load_project, save_project, to_canonical_json, AuditEntry, Mutation, Project,
    ProjectDocument, ProjectMeta, ProjectStore, StoreError,
};
pub use trace::{
    critical_traces, impact_of_capability_change, impact_of_directive_change, impact_of_node_change,
    impact_of_requirement_change, need_neighborhood, trace_backward, trace_forward, trace_matrix, Direction,
    EntityRef, ImpactReport, LinkKind, TraceError, TracePath,
};
pub use transformation::{
    transform_capability, transform_directive, validate_transformation, Drafts, Requirement, RequirementStatus,
    TransformError, TransformationReport,
};
