//! Local HTTP API over a [`ProjectStore`]. Reads work on a snapshot; writes
//! go through the store's single writer.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use capweave_core::{
    export_matrix, to_canonical_json, AuditEntry, Constraints, Drafts, Mutation, NodeId, Project, ProjectStore,
    Requirement, Strategy,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ShellError;
use crate::query::{self, ImpactQuery};

pub type AppState = Arc<ProjectStore>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/project", get(project))
        .route("/graph", get(graph))
        .route("/candidates", get(candidates))
        .route("/selection", post(selection))
        .route("/transform", post(transform))
        .route("/trace/{entity}", get(trace))
        .route("/impact", post(impact))
        .route("/mutations", post(mutations))
        .route("/export/matrix", get(matrix))
        .with_state(store)
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for ShellError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        json(status, query::error_body(&self))
    }
}

type Reply = Result<Response, ShellError>;

fn ok(body: String) -> Reply {
    Ok(json(StatusCode::OK, body))
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ShellError> {
    serde_json::from_slice(body).map_err(|e| ShellError::usage(format!("request body: {e}")))
}

fn parse_query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ShellError> {
    q.map(|Query(v)| v).map_err(|e| ShellError::usage(e.body_text()))
}

async fn write(store: AppState, mutation: Mutation) -> Result<Arc<Project>, ShellError> {
    tokio::task::spawn_blocking(move || store.commit(mutation))
        .await
        .map_err(|e| ShellError::new(crate::error::ErrorKind::Io, e.to_string()))?
        .map_err(ShellError::from)
}

fn last_entry(project: &Project) -> &AuditEntry {
    project.audit_log().last().expect("a committed mutation is audited")
}

async fn project(State(store): State<AppState>) -> Reply {
    let bytes = store.snapshot().save();
    ok(String::from_utf8(bytes).expect("canonical JSON is UTF-8"))
}

async fn graph(State(store): State<AppState>) -> Reply {
    ok(query::graph(&store.snapshot()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateParams {
    strategy: Option<Strategy>,
    /// `cohesion,coupling,abstraction`
    w: Option<String>,
}

async fn candidates(State(store): State<AppState>, q: Result<Query<CandidateParams>, QueryRejection>) -> Reply {
    let params = parse_query(q)?;
    let weights = params.w.as_deref().map(query::parse_weights).transpose()?;
    ok(query::formulate(&store.snapshot(), params.strategy, weights)?)
}

async fn selection(State(store): State<AppState>, body: Bytes) -> Reply {
    let constraints: Constraints = if body.is_empty() {
        *store.snapshot().constraints()
    } else {
        parse_body(&body)?
    };
    let chosen = query::select(&store.snapshot(), &constraints)?;
    let mutation = Mutation::RecordSelection {
        members: chosen.chosen_set.members.clone(),
        constraints: Some(constraints),
    };
    let project = write(store, mutation).await?;
    ok(to_canonical_json(&project.selection()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformBody {
    capability: NodeId,
    drafts: Drafts,
}

async fn transform(State(store): State<AppState>, body: Bytes) -> Reply {
    let TransformBody { capability, drafts } = parse_body(&body)?;
    let project = write(store, Mutation::Transform { capability, drafts }).await?;
    let created: Vec<&Requirement> = last_entry(&project)
        .entities
        .iter()
        .filter_map(|id| project.requirements().get(id.as_str()))
        .collect();
    ok(to_canonical_json(&created))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceParams {
    direction: Option<TraceDirection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TraceDirection {
    Forward,
    Backward,
}

async fn trace(
    State(store): State<AppState>,
    Path(entity): Path<String>,
    q: Result<Query<TraceParams>, QueryRejection>,
) -> Reply {
    let project = store.snapshot();
    let backward = match parse_query(q)?.direction {
        Some(d) => matches!(d, TraceDirection::Backward),
        None => project.requirements().contains_key(entity.as_str()),
    };
    ok(query::trace(&project, &entity, backward)?)
}

async fn impact(State(store): State<AppState>, body: Bytes) -> Reply {
    let q: ImpactQuery = parse_body(&body)?;
    ok(query::impact(&store.snapshot(), &q)?)
}

#[derive(Debug, Serialize)]
struct Committed<'a> {
    version: u64,
    entry: &'a AuditEntry,
}

async fn mutations(State(store): State<AppState>, body: Bytes) -> Reply {
    let mutation: Mutation = parse_body(&body)?;
    let project = write(store, mutation).await?;
    ok(to_canonical_json(&Committed {
        version: project.version(),
        entry: last_entry(&project),
    }))
}

async fn matrix(State(store): State<AppState>) -> Reply {
    let csv = export_matrix(&store.snapshot());
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
