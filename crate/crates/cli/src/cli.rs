//! Command-line front end. [`run`] never exits the process, so it can be
//! driven from tests.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use capweave_core::store::{read_project, write_project};
use capweave_core::{
    export_matrix, to_canonical_json, Constraints, Direction, Drafts, Mutation, Project, ProjectStore, Requirement,
    Strategy,
};
use clap::{Args, Parser, Subcommand};

use crate::error::{ErrorKind, ShellError};
use crate::query::{self, EntityKind, ImpactQuery};

#[derive(Debug, Parser)]
#[command(name = "capweave", version, about = "Capability formulation and traceability workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ProjectArg {
    /// Project file.
    #[arg(long, short = 'p', env = "CAPWEAVE_PROJECT")]
    pub project: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the project's structure and report transformation gaps.
    Validate(ProjectArg),
    /// List ranked candidate Capability sets.
    Formulate {
        #[command(flatten)]
        file: ProjectArg,
        #[arg(long, conflicts_with = "greedy")]
        exact: bool,
        #[arg(long)]
        greedy: bool,
        /// Cohesion, coupling and abstraction weights, e.g. `1,1,0.5`.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Choose and schedule a Capability set.
    Optimize {
        #[command(flatten)]
        file: ProjectArg,
        /// Effort per increment; 0 means unlimited.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        min_trl: Option<u8>,
        /// Record the selection in the project file.
        #[arg(long)]
        in_place: bool,
    },
    /// Turn a chosen capability's directives into requirements.
    Transform {
        #[command(flatten)]
        file: ProjectArg,
        #[arg(long)]
        capability: String,
        /// JSON file mapping directive ids to requirement texts.
        #[arg(long)]
        drafts: PathBuf,
        #[arg(long)]
        in_place: bool,
    },
    /// Trace forward from a need, or backward from a requirement.
    Trace {
        #[command(flatten)]
        file: ProjectArg,
        #[arg(long)]
        from: String,
        #[arg(long)]
        backward: bool,
    },
    /// Report what a change to an entity would affect.
    Impact {
        #[command(flatten)]
        file: ProjectArg,
        #[arg(long)]
        entity: String,
        #[arg(long, value_parser = parse_direction)]
        direction: Option<Direction>,
        #[arg(long, value_enum)]
        kind: Option<EntityKind>,
    },
    /// Export the trace matrix as CSV or an impact report as JSON.
    Export {
        #[command(flatten)]
        file: ProjectArg,
        #[arg(long, conflicts_with = "impact", required_unless_present = "impact")]
        matrix: bool,
        /// Entity whose impact report to export.
        #[arg(long)]
        impact: Option<String>,
    },
    /// Serve the HTTP API on localhost.
    Serve {
        #[command(flatten)]
        file: ProjectArg,
        #[arg(long, default_value_t = 7420)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandResult {
    fn success(stdout: String) -> Self {
        Self {
            exit_code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn failure(e: &ShellError) -> Self {
        Self {
            exit_code: e.exit_code(),
            stdout: String::new(),
            stderr: query::error_body(e),
        }
    }
}

pub fn run<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            if code == 0 {
                CommandResult::success(text)
            } else {
                CommandResult {
                    exit_code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            }
        }
    }
}

pub fn execute(cli: Cli) -> CommandResult {
    match cli.command {
        Command::Validate(file) => validate(&file.project),
        other => match dispatch(other) {
            Ok(out) => CommandResult::success(out),
            Err(e) => CommandResult::failure(&e),
        },
    }
}

fn validate(path: &Path) -> CommandResult {
    let result = read_project(path);
    let out = query::validation(&result);
    match result {
        Ok(_) => CommandResult::success(out),
        Err(e) => {
            let e = ShellError::from(e);
            CommandResult {
                exit_code: e.exit_code(),
                stdout: out,
                stderr: query::error_body(&e),
            }
        }
    }
}

fn load(file: &ProjectArg) -> Result<Project, ShellError> {
    Ok(read_project(&file.project)?)
}

fn dispatch(command: Command) -> Result<String, ShellError> {
    match command {
        Command::Validate(_) => unreachable!("handled by execute"),
        Command::Formulate {
            file,
            exact,
            greedy,
            weights,
        } => {
            let strategy = match (exact, greedy) {
                (true, _) => Some(Strategy::Exact),
                (_, true) => Some(Strategy::Greedy),
                _ => None,
            };
            let weights = weights.as_deref().map(query::parse_weights).transpose()?;
            query::formulate(&load(&file)?, strategy, weights)
        }
        Command::Optimize {
            file,
            budget,
            min_trl,
            in_place,
        } => {
            let project = load(&file)?;
            let current = project.constraints();
            let constraints = Constraints::new(
                budget.unwrap_or(current.schedule_budget),
                min_trl.unwrap_or(current.min_tech_readiness),
            )?;
            let chosen = query::select(&project, &constraints)?;
            if !in_place {
                return Ok(to_canonical_json(&chosen));
            }
            let project = project.apply(Mutation::RecordSelection {
                members: chosen.chosen_set.members.clone(),
                constraints: Some(constraints),
            })?;
            write_project(&file.project, &project)?;
            Ok(to_canonical_json(&project.selection()))
        }
        Command::Transform {
            file,
            capability,
            drafts,
            in_place,
        } => {
            let project = load(&file)?;
            let bytes = std::fs::read(&drafts)
                .map_err(|e| ShellError::new(ErrorKind::Io, format!("{}: {e}", drafts.display())))?;
            let drafts: Drafts = serde_json::from_slice(&bytes)
                .map_err(|e| ShellError::usage(format!("{}: {e}", drafts.display())))?;
            let updated = project.apply(Mutation::Transform {
                capability: capability.as_str().into(),
                drafts,
            })?;
            let created: Vec<&Requirement> = updated
                .requirements()
                .values()
                .filter(|r| !project.requirements().contains_key(r.id.as_str()))
                .collect();
            let out = to_canonical_json(&created);
            if in_place {
                write_project(&file.project, &updated)?;
            }
            Ok(out)
        }
        Command::Trace { file, from, backward } => query::trace(&load(&file)?, &from, backward),
        Command::Impact {
            file,
            entity,
            direction,
            kind,
        } => query::impact(&load(&file)?, &ImpactQuery { entity, direction, kind }),
        Command::Export { file, matrix, impact } => {
            let project = load(&file)?;
            match impact {
                Some(entity) if !matrix => query::impact(
                    &project,
                    &ImpactQuery {
                        entity,
                        direction: None,
                        kind: None,
                    },
                ),
                _ => Ok(export_matrix(&project)),
            }
        }
        Command::Serve { file, port, host } => serve(&file.project, SocketAddr::new(host, port)),
    }
}

fn serve(path: &Path, addr: SocketAddr) -> Result<String, ShellError> {
    let store = Arc::new(ProjectStore::open(path)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| ShellError::new(ErrorKind::Io, e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| ShellError::new(ErrorKind::Io, format!("bind {addr}: {e}")))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, crate::api::router(store))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| ShellError::new(ErrorKind::Io, e.to_string()))
    })?;
    Ok(String::new())
}
