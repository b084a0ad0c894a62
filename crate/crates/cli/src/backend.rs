//! Where workflow commands go: a data directory opened in-process, or a
//! running service reached over HTTP.

use std::path::Path;

use acgrade_core::analytics::CohortReport;
use acgrade_core::sheet::{RoutingResult, ScanPage};
use acgrade_core::{Assignment, BookletId, TaskId};
use acgrade_service::export::load_registry;
use acgrade_service::service::ExamStatus;
use acgrade_service::{Actor, Claim, ExamState, GradingService, ServiceError, ServiceOptions, SubmitRequest};
use anyhow::{anyhow, bail, Context, Result};
use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

pub trait Backend {
    fn upload_exam(&self, json: &str) -> Result<ExamStatus>;
    fn status(&self) -> Result<ExamStatus>;
    fn transition(&self, to: ExamState) -> Result<ExamState>;
    fn ingest(&self, pages: Vec<ScanPage>) -> Result<RoutingResult>;
    /// `None` when nothing is left to grade.
    fn claim_next(&self, task: &TaskId) -> Result<Option<Claim>>;
    fn assignment(&self, booklet: &BookletId, task: &TaskId) -> Result<Option<Assignment>>;
    fn submit(&self, request: SubmitRequest) -> Result<Assignment>;
    fn export_grades(&self) -> Result<String>;
    fn export_feedback(&self, booklet: &BookletId) -> Result<String>;
    fn cohort(&self) -> Result<CohortReport>;
}

/// In-process service over a data directory. The operator acts as lead.
pub struct Local {
    service: GradingService,
    actor: Actor,
}

impl Local {
    pub fn open(data_dir: &Path) -> Result<Self> {
        let registry_path = data_dir.join("registry.csv");
        let registry = if registry_path.exists() { Some(load_registry(&registry_path)?) } else { None };
        let options = ServiceOptions { registry, ..ServiceOptions::default() };
        let service = GradingService::open(data_dir, options)
            .with_context(|| format!("opening data directory {}", data_dir.display()))?;
        Ok(Local { service, actor: Actor::lead("operator") })
    }
}

impl Backend for Local {
    fn upload_exam(&self, json: &str) -> Result<ExamStatus> {
        self.service.upload_exam(&self.actor, json)?;
        Ok(self.service.status()?)
    }

    fn status(&self) -> Result<ExamStatus> {
        Ok(self.service.status()?)
    }

    fn transition(&self, to: ExamState) -> Result<ExamState> {
        Ok(self.service.transition(&self.actor, to)?)
    }

    fn ingest(&self, pages: Vec<ScanPage>) -> Result<RoutingResult> {
        Ok(self.service.ingest_batch(&self.actor, pages)?)
    }

    fn claim_next(&self, task: &TaskId) -> Result<Option<Claim>> {
        match self.service.claim_next(&self.actor, task) {
            Ok(claim) => Ok(Some(claim)),
            Err(ServiceError::NoWork(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn assignment(&self, booklet: &BookletId, task: &TaskId) -> Result<Option<Assignment>> {
        match self.service.assignment(booklet, task) {
            Ok(a) => Ok(Some(a)),
            Err(ServiceError::NotFound(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn submit(&self, request: SubmitRequest) -> Result<Assignment> {
        Ok(self.service.submit_assignment(&self.actor, request)?)
    }

    fn export_grades(&self) -> Result<String> {
        Ok(self.service.export_grades()?)
    }

    fn export_feedback(&self, booklet: &BookletId) -> Result<String> {
        Ok(self.service.export_feedback(booklet)?)
    }

    fn cohort(&self) -> Result<CohortReport> {
        Ok(self.service.cohort()?)
    }
}

pub struct Remote {
    client: Client,
    base: String,
    token: String,
}

impl Remote {
    pub fn new(base: &str, token: &str) -> Self {
        Remote { client: Client::new(), base: base.trim_end_matches('/').to_string(), token: token.to_string() }
    }

    fn request(&self, method: reqwest::Method, path: &str) -> RequestBuilder {
        self.client.request(method, format!("{}{}", self.base, path)).bearer_auth(&self.token)
    }

    fn send(&self, builder: RequestBuilder) -> Result<Response> {
        let response = builder.send().with_context(|| format!("contacting {}", self.base))?;
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let text = response.text().unwrap_or_default();
        let body: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
        let mut message = body["error"].as_str().map_or(text.clone(), str::to_string);
        if let Some(diagnostics) = body["diagnostics"].as_array() {
            message = std::iter::once("invalid exam".to_string())
                .chain(diagnostics.iter().map(|d| {
                    format!("{}: {}", d["pointer"].as_str().unwrap_or(""), d["message"].as_str().unwrap_or(""))
                }))
                .collect::<Vec<_>>()
                .join("\n");
        }
        bail!("server answered {status}: {message}")
    }

    fn get_json<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        Ok(self.send(self.request(reqwest::Method::GET, path))?.json()?)
    }

    fn post_json<T: DeserializeOwned>(&self, path: &str, body: &Value) -> Result<T> {
        Ok(self.send(self.request(reqwest::Method::POST, path).json(body))?.json()?)
    }

    fn get_text(&self, path: &str) -> Result<String> {
        Ok(self.send(self.request(reqwest::Method::GET, path))?.text()?)
    }
}

impl Backend for Remote {
    fn upload_exam(&self, json: &str) -> Result<ExamStatus> {
        let builder = self
            .request(reqwest::Method::POST, "/api/exams")
            .header("content-type", "application/json")
            .body(json.to_string());
        Ok(self.send(builder)?.json()?)
    }

    fn status(&self) -> Result<ExamStatus> {
        self.get_json("/api/exams/current")
    }

    fn transition(&self, to: ExamState) -> Result<ExamState> {
        let exam_id = self.status()?.exam_id;
        let reply: Value = self.post_json(&format!("/api/exams/{exam_id}/state"), &json!({ "state": to }))?;
        serde_json::from_value(reply["state"].clone()).map_err(|e| anyhow!("unexpected reply: {e}"))
    }

    fn ingest(&self, pages: Vec<ScanPage>) -> Result<RoutingResult> {
        self.post_json("/api/scans/batch", &json!({ "pages": pages }))
    }

    fn claim_next(&self, task: &TaskId) -> Result<Option<Claim>> {
        let builder = self.request(reqwest::Method::GET, "/api/grading/next").query(&[("task", task.as_str())]);
        let response = self.send(builder)?;
        if response.status() == StatusCode::NO_CONTENT {
            return Ok(None);
        }
        Ok(Some(response.json()?))
    }

    fn assignment(&self, booklet: &BookletId, task: &TaskId) -> Result<Option<Assignment>> {
        let builder = self.request(reqwest::Method::GET, &format!("/api/assignments/{booklet}/{task}"));
        let response = builder.send().with_context(|| format!("contacting {}", self.base))?;
        if response.status() == StatusCode::NOT_FOUND {
            return Ok(None);
        }
        Ok(Some(self.send_checked(response)?.json()?))
    }

    fn submit(&self, request: SubmitRequest) -> Result<Assignment> {
        self.post_json("/api/assignments", &serde_json::to_value(request)?)
    }

    fn export_grades(&self) -> Result<String> {
        self.get_text("/api/export/grades.csv")
    }

    fn export_feedback(&self, booklet: &BookletId) -> Result<String> {
        self.get_text(&format!("/api/export/feedback/{booklet}"))
    }

    fn cohort(&self) -> Result<CohortReport> {
        self.get_json("/api/analytics/cohort")
    }
}

impl Remote {
    fn send_checked(&self, response: Response) -> Result<Response> {
        if response.status().is_success() {
            Ok(response)
        } else {
            let status = response.status();
            bail!("server answered {status}: {}", response.text().unwrap_or_default())
        }
    }
}
