use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use rskill::planning::PlanError;
use rskill::sim::SimError;
use rskill::skill::SkillError;
use rskill::skill_manager::ManagerError;
use rskill::task_manager::MissionError;
use rskill::world_model::WmError;
use serde::{Deserialize, Serialize};
use serde_json::Value as JsonValue;
use thiserror::Error;

/// Failure while assembling or running a deployment.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Wm(#[from] WmError),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Manager(#[from] ManagerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Structured error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: JsonValue,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                detail: JsonValue::Null,
            },
        }
    }

    pub fn detail(mut self, detail: JsonValue) -> Self {
        self.body.detail = detail;
        self
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn invalid(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn debug_detail(e: &impl std::fmt::Debug) -> JsonValue {
    JsonValue::String(format!("{e:?}"))
}

impl From<WmError> for ApiError {
    fn from(e: WmError) -> Self {
        let msg = e.to_string();
        let err = match &e {
            WmError::UnknownElement(id) => {
                return ApiError::not_found("unknown_element", msg).detail(serde_json::json!({ "id": id }))
            }
            WmError::UnknownConcept(_) => ApiError::invalid("unknown_concept", msg),
            WmError::DuplicateElement(_) => ApiError::conflict("duplicate_element", msg),
            WmError::ElementHasChildren(_) => ApiError::conflict("element_has_children", msg),
            WmError::CycleDetected { .. } => ApiError::invalid("cycle_detected", msg),
            WmError::RootImmutable => ApiError::invalid("root_immutable", msg),
            WmError::ReservedPredicate(_) => ApiError::invalid("reserved_predicate", msg),
            WmError::VersionTooOld { .. } => ApiError::not_found("version_too_old", msg),
            WmError::FutureVersion { .. } => ApiError::not_found("future_version", msg),
            WmError::InvalidLiteral(_) | WmError::InvalidScene(_) | WmError::Graph(_) | WmError::Turtle(_) => {
                ApiError::invalid("invalid_world_model_input", msg)
            }
        };
        err.detail(debug_detail(&e))
    }
}

impl From<ManagerError> for ApiError {
    fn from(e: ManagerError) -> Self {
        let msg = e.to_string();
        match e {
            ManagerError::UnknownTask(id) => {
                ApiError::not_found("unknown_task", msg).detail(serde_json::json!({ "id": id }))
            }
            ManagerError::ResourceBusy { element, task } => ApiError::conflict("resource_busy", msg)
                .detail(serde_json::json!({ "element": element, "task": task })),
            ManagerError::Skill(SkillError::UnknownSkill(name)) => {
                ApiError::not_found("unknown_skill", msg).detail(serde_json::json!({ "skill": name }))
            }
            ManagerError::Skill(SkillError::NoConsistentAssignment { skill, rejections }) => {
                let reasons: Vec<String> = rejections.iter().map(|r| r.to_string()).collect();
                ApiError::invalid("no_consistent_assignment", msg)
                    .detail(serde_json::json!({ "skill": skill, "rejections": reasons }))
            }
            ManagerError::Wm(w) => w.into(),
            other => ApiError::invalid("invalid_task", msg).detail(debug_detail(&other)),
        }
    }
}

impl From<PlanError> for ApiError {
    fn from(e: PlanError) -> Self {
        let msg = e.to_string();
        let code = match &e {
            PlanError::SyntaxError { .. } => "goal_syntax",
            PlanError::EmptyGoal => "empty_goal",
            PlanError::UnknownPredicate(_) => "unknown_predicate",
            PlanError::UnknownObject(_) => "unknown_object",
            PlanError::NoPlan => "no_plan",
            PlanError::ResourceLimit(_) => "resource_limit",
            _ => "planning_error",
        };
        ApiError::invalid(code, msg).detail(debug_detail(&e))
    }
}

impl From<MissionError> for ApiError {
    fn from(e: MissionError) -> Self {
        let msg = e.to_string();
        match e {
            MissionError::UnknownMission(id) => {
                ApiError::not_found("unknown_mission", msg).detail(serde_json::json!({ "id": id }))
            }
            MissionError::NoManagers => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_managers", msg),
            MissionError::Plan(p) => p.into(),
        }
    }
}
