use capweave_core::{FormulationError, MetricError, OptimizeError, StoreError, TraceError, TransformError, Violation};
use serde::Serialize;

/// Failure classes shared by the CLI and the HTTP API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorKind {
    /// Malformed arguments or request payload.
    Usage,
    NotFound,
    /// The project, or the project a mutation would produce, is invalid.
    Validation,
    /// Constraints or preconditions cannot be met.
    Infeasible,
    Io,
}

#[derive(Debug, Clone, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct ShellError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ShellError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            violations: Vec::new(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::NotFound, message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation | ErrorKind::Infeasible => 1,
            ErrorKind::Usage | ErrorKind::NotFound => 2,
            ErrorKind::Io => 3,
        }
    }

    pub fn status(&self) -> u16 {
        match self.kind {
            ErrorKind::Usage => 400,
            ErrorKind::NotFound => 404,
            ErrorKind::Validation => 409,
            ErrorKind::Infeasible => 422,
            ErrorKind::Io => 500,
        }
    }
}

impl From<StoreError> for ShellError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::Parse { .. } => Self::new(ErrorKind::Validation, message),
            StoreError::Validation(violations) => Self {
                kind: ErrorKind::Validation,
                message,
                violations,
            },
            StoreError::UnknownEntity { .. } => Self::not_found(message),
            StoreError::Transform(t) => t.into(),
            StoreError::Optimize(o) => o.into(),
            StoreError::Formulation(f) => f.into(),
            StoreError::Io { .. } => Self::new(ErrorKind::Io, message),
        }
    }
}

impl From<TransformError> for ShellError {
    fn from(e: TransformError) -> Self {
        let kind = match e {
            TransformError::EmptyRequirementList(_) | TransformError::BlankRequirementText(_) => ErrorKind::Usage,
            TransformError::CapabilityNotChosen(_) | TransformError::DirectiveNotInChosenCapability { .. } => {
                ErrorKind::NotFound
            }
            TransformError::NoSelection | TransformError::CapabilityDeferred(_) => ErrorKind::Infeasible,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<OptimizeError> for ShellError {
    fn from(e: OptimizeError) -> Self {
        let kind = match e {
            OptimizeError::InvalidConstraints(_) => ErrorKind::Usage,
            OptimizeError::GraphMismatch => ErrorKind::Validation,
            _ => ErrorKind::Infeasible,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<FormulationError> for ShellError {
    fn from(e: FormulationError) -> Self {
        let kind = match e {
            FormulationError::Metric(MetricError::InvalidCandidate(_)) => ErrorKind::Validation,
            FormulationError::InvalidLimits(_) | FormulationError::Metric(_) => ErrorKind::Usage,
            FormulationError::Graph(_) => ErrorKind::NotFound,
            _ => ErrorKind::Infeasible,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<TraceError> for ShellError {
    fn from(e: TraceError) -> Self {
        let kind = match e {
            TraceError::InvalidThreshold(_) => ErrorKind::Usage,
            TraceError::NoSourceNeed(_) => ErrorKind::Infeasible,
            _ => ErrorKind::NotFound,
        };
        Self::new(kind, e.to_string())
    }
}
