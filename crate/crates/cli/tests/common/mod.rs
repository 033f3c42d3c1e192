#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use capweave_core::store::write_project;
use capweave_core::{Project, ProjectStore};
use capweave_cli::{run, CommandResult};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub path: PathBuf,
}

impl Workspace {
    pub fn new(project: &Project) -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let path = dir.path().join("project.capweave.json");
        write_project(&path, project).expect("write project");
        Self { dir, path }
    }

    pub fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, contents).expect("write file");
        p
    }

    pub fn cli(&self, args: &[&str]) -> CommandResult {
        cli_with(&self.path, args)
    }
}

pub fn cli_with(path: &Path, args: &[&str]) -> CommandResult {
    let mut argv = vec!["capweave".to_owned(), args[0].to_owned(), "--project".to_owned(), path.display().to_string()];
    argv.extend(args[1..].iter().map(|s| s.to_string()));
    run(argv)
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).expect("JSON body")
    }
}

pub async fn request(store: &Arc<ProjectStore>, method: &str, uri: &str, body: Option<&str>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_owned())).unwrap_or_else(Body::empty))
        .expect("request");
    let resp = capweave_cli::api::router(store.clone()).oneshot(req).await.expect("infallible");
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_owned())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes();
    Reply {
        status,
        content_type,
        body: String::from_utf8(bytes.to_vec()).expect("UTF-8 body"),
    }
}

pub fn store(project: Project) -> Arc<ProjectStore> {
    Arc::new(ProjectStore::in_memory(project))
}
