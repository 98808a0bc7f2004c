//! The v1 HTTP and WebSocket surface.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use rskill::bt::{NodeDump, TranscriptEntry};
use rskill::ontology::{serialize_turtle, vocab, Iri};
use rskill::planning::{emit_domain, emit_problem, generate_domain, generate_problem, parse_goal, plan, GoalLiteral};
use rskill::skill::{Bindings, ImplBody, ParamType, SkillDescription, Value, ROBOT_KEY};
use rskill::skill_manager::{SkillManager, TaskInfo, TaskState};
use rskill::task_manager::{Goal, MissionInfo, MissionState};
use rskill::world_model::{Element, ElementPatch, NewElement, WmSnapshot};
use serde::{Deserialize, Serialize};

use crate::deployment::Deployment;
use crate::error::ApiError;

pub type Shared = Arc<Deployment>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/status", get(status))
        .route("/v1/managers", get(managers))
        .route("/v1/skills", get(skills))
        .route("/v1/wm", get(wm_get))
        .route("/v1/wm/scene", put(wm_load))
        .route("/v1/wm/elements", post(element_add))
        .route(
            "/v1/wm/elements/{id}",
            get(element_get).patch(element_patch).delete(element_delete),
        )
        .route("/v1/wm/relations", put(relation_put))
        .route("/v1/tasks", get(task_list).post(task_start))
        .route("/v1/tasks/{id}", get(task_get).delete(task_stop))
        .route("/v1/missions", get(mission_list).post(mission_submit))
        .route("/v1/missions/{id}", get(mission_get))
        .route("/v1/pddl", get(pddl))
        .route("/v1/clock/step", post(clock_step))
        .route("/v1/events", get(events))
        .fallback(|| async { ApiError::not_found("no_route", "no such endpoint") })
        .with_state(state)
}

fn parse_iri(s: &str) -> ApiResult<Iri> {
    Iri::parse(s).map_err(|e| ApiError::invalid("invalid_iri", e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Status {
    pub tick: u64,
    pub time: f64,
    pub clock_running: bool,
    pub wm_version: u64,
    pub event_head: u64,
}

async fn status(State(d): State<Shared>) -> Json<Status> {
    Json(Status {
        tick: d.tick(),
        time: d.time(),
        clock_running: d.clock_running(),
        wm_version: d.wm().version(),
        event_head: d.hub().head(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManagerView {
    pub name: String,
    pub robot: Iri,
    pub rate: f64,
    pub tick: u64,
    pub skills: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

async fn managers(State(d): State<Shared>) -> Json<Vec<ManagerView>> {
    Json(
        d.managers()
            .iter()
            .map(|m| ManagerView {
                name: m.name().to_string(),
                robot: m.robot().clone(),
                rate: m.config().rate,
                tick: m.tick(),
                skills: m.registry().descriptions().map(|s| s.name.clone()).collect(),
                diagnostics: m.diagnostics().to_vec(),
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplementationView {
    pub name: String,
    pub kind: String,
    /// Parameters whose type the implementation narrows.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub refine: BTreeMap<String, ParamType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillView {
    #[serde(flatten)]
    pub description: SkillDescription,
    pub implementations: Vec<ImplementationView>,
    pub managers: Vec<String>,
}

pub fn skill_views(managers: &[SkillManager]) -> Vec<SkillView> {
    let mut out: BTreeMap<String, SkillView> = BTreeMap::new();
    for m in managers {
        let reg = m.registry();
        for desc in reg.descriptions() {
            let view = out.entry(desc.name.clone()).or_insert_with(|| SkillView {
                description: desc.clone(),
                implementations: reg
                    .implementations_of(&desc.name)
                    .map(|i| ImplementationView {
                        name: i.name.clone(),
                        kind: match i.body {
                            ImplBody::Primitive { .. } => "primitive".into(),
                            ImplBody::Compound { .. } => "compound".into(),
                        },
                        refine: i
                            .description
                            .params
                            .iter()
                            .filter(|p| desc.params.iter().any(|b| b.key == p.key && b.ty != p.ty))
                            .map(|p| (p.key.clone(), p.ty.clone()))
                            .collect(),
                    })
                    .collect(),
                managers: Vec::new(),
            });
            view.managers.push(m.name().to_string());
        }
    }
    out.into_values().collect()
}

async fn skills(State(d): State<Shared>) -> Json<Vec<SkillView>> {
    Json(skill_views(d.managers()))
}

#[derive(Debug, Default, Deserialize)]
struct WmQuery {
    version: Option<u64>,
    format: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WmView {
    pub version: u64,
    pub root: Iri,
    /// Depth-first along the containment tree, root first.
    pub elements: Vec<Element>,
}

/// Elements in depth-first containment order; anything unreachable from
/// the root follows in id order.
pub fn element_tree(snap: &WmSnapshot) -> Vec<Element> {
    let root = vocab::scene_root();
    let mut order = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if !seen.insert(id.clone()) {
            continue;
        }
        let mut kids = snap.children(&id);
        kids.sort();
        stack.extend(kids.into_iter().rev());
        order.push(id);
    }
    order.extend(snap.element_ids().into_iter().filter(|id| !seen.contains(id)));
    order.iter().filter_map(|id| snap.element(id)).collect()
}

async fn wm_get(State(d): State<Shared>, Query(q): Query<WmQuery>) -> ApiResult<Response> {
    let snap = match q.version {
        Some(v) => d.wm().read(|m| m.snapshot_at(v))?,
        None => d.wm().snapshot(),
    };
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(WmView {
            version: snap.version(),
            root: vocab::scene_root(),
            elements: element_tree(&snap),
        })
        .into_response()),
        Some("turtle") => Ok(([(header::CONTENT_TYPE, "text/turtle")], serialize_turtle(snap.graph())).into_response()),
        Some(other) => Err(ApiError::invalid("unknown_format", format!("unknown format {other}"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Committed {
    pub version: u64,
}

async fn wm_load(State(d): State<Shared>, body: String) -> ApiResult<Json<Committed>> {
    let scene = rskill::ontology::parse_turtle(&body).map_err(|e| ApiError::invalid("turtle_syntax", e.to_string()))?;
    let version = d.wm().commit(|m| m.load_scene(&scene))?;
    Ok(Json(Committed { version }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NewElementRequest {
    #[serde(default)]
    pub id: Option<Iri>,
    #[serde(flatten)]
    pub element: NewElement,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedElement {
    pub id: Iri,
    pub version: u64,
}

async fn element_add(
    State(d): State<Shared>,
    Json(req): Json<NewElementRequest>,
) -> ApiResult<(StatusCode, Json<CreatedElement>)> {
    let (id, version) = d.wm().commit(|m| match req.id {
        Some(id) => m.add_element_with_id(id.clone(), req.element).map(|v| (id, v)),
        None => {
            let id = m.add_element(req.element)?;
            Ok((id, m.version()))
        }
    })?;
    Ok((StatusCode::CREATED, Json(CreatedElement { id, version })))
}

async fn element_get(State(d): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Element>> {
    let id = parse_iri(&id)?;
    d.wm()
        .snapshot()
        .element(&id)
        .map(Json)
        .ok_or_else(|| rskill::world_model::WmError::UnknownElement(id).into())
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct PatchRequest {
    #[serde(flatten)]
    pub patch: ElementPatch,
    /// Re-parent under this element, keeping the world pose.
    #[serde(default)]
    pub parent: Option<Iri>,
}

async fn element_patch(
    State(d): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<PatchRequest>,
) -> ApiResult<Json<Committed>> {
    let id = parse_iri(&id)?;
    let touches = req.patch.label.is_some() || !req.patch.properties.is_empty() || req.patch.pose.is_some();
    let version = d.wm().commit(|m| {
        if touches || req.parent.is_none() {
            m.update_element(&id, req.patch)?;
        }
        if let Some(p) = &req.parent {
            m.move_element(&id, p)?;
        }
        Ok(m.version())
    })?;
    Ok(Json(Committed { version }))
}

async fn element_delete(State(d): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Committed>> {
    let id = parse_iri(&id)?;
    let version = d.wm().commit(|m| m.remove_element(&id))?;
    Ok(Json(Committed { version }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RelationRequest {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Iri,
    #[serde(default = "yes")]
    pub state: bool,
}

fn yes() -> bool {
    true
}

async fn relation_put(State(d): State<Shared>, Json(r): Json<RelationRequest>) -> ApiResult<Json<Committed>> {
    let version = d
        .wm()
        .commit(|m| m.set_relation(&r.subject, &r.predicate, &r.object, r.state))?;
    Ok(Json(Committed { version }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskRequest {
    pub skill: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    /// Target manager; otherwise chosen by the `Robot` parameter.
    #[serde(default)]
    pub manager: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCreated {
    pub id: String,
    pub manager: String,
    pub implementation: String,
    pub bindings: Bindings,
}

pub fn pick_manager<'a>(d: &'a Deployment, req: &TaskRequest) -> ApiResult<&'a SkillManager> {
    if let Some(name) = &req.manager {
        return d
            .manager(name)
            .ok_or_else(|| ApiError::not_found("unknown_manager", format!("unknown manager {name}")));
    }
    if let Some(robot) = req.params.get(ROBOT_KEY) {
        let iri = match robot {
            Value::Element(i) => i.clone(),
            Value::Str(s) => parse_iri(s)?,
            other => return Err(ApiError::invalid("invalid_robot", format!("Robot must be an element, got {other}"))),
        };
        return d
            .manager_for_robot(&iri)
            .ok_or_else(|| ApiError::not_found("unknown_robot", format!("no manager drives {iri}")));
    }
    match d.managers() {
        [] => Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_managers", "no skill manager is registered")),
        [only] => Ok(only),
        _ => Err(ApiError::invalid(
            "ambiguous_manager",
            "several managers are running; pass `manager` or a Robot parameter",
        )),
    }
}

async fn task_start(
    State(d): State<Shared>,
    Json(req): Json<TaskRequest>,
) -> ApiResult<(StatusCode, Json<TaskCreated>)> {
    let m = pick_manager(&d, &req)?;
    let started = m.start_task(&req.skill, req.params.clone())?;
    Ok((
        StatusCode::CREATED,
        Json(TaskCreated {
            id: started.id,
            manager: m.name().to_string(),
            implementation: started.implementation,
            bindings: started.bindings,
        }),
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskView {
    pub manager: String,
    #[serde(flatten)]
    pub info: TaskInfo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskDetail {
    pub manager: String,
    #[serde(flatten)]
    pub info: TaskInfo,
    pub tree: NodeDump,
    pub transcript: Vec<TranscriptEntry>,
}

async fn task_list(State(d): State<Shared>) -> Json<Vec<TaskView>> {
    Json(
        d.managers()
            .iter()
            .flat_map(|m| {
                m.tasks().into_iter().map(|info| TaskView {
                    manager: m.name().to_string(),
                    info,
                })
            })
            .collect(),
    )
}

fn task_owner<'a>(d: &'a Deployment, id: &str) -> ApiResult<&'a SkillManager> {
    d.manager_for_task(id)
        .ok_or_else(|| rskill::skill_manager::ManagerError::UnknownTask(id.to_string()).into())
}

async fn task_get(State(d): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<TaskDetail>> {
    let m = task_owner(&d, &id)?;
    Ok(Json(TaskDetail {
        manager: m.name().to_string(),
        info: m.task(&id)?,
        tree: m.dump(&id)?,
        transcript: m.transcript(&id)?,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskStopped {
    pub id: String,
    pub state: TaskState,
}

async fn task_stop(State(d): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<TaskStopped>> {
    let m = task_owner(&d, &id)?;
    let state = m.stop_task(&id)?;
    Ok(Json(TaskStopped { id, state }))
}

/// A goal as triple-syntax text or as structured literals.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoalInput {
    Text(String),
    Literals(Vec<GoalLiteral>),
}

impl GoalInput {
    /// Text goals accept `;` as well as newlines between literals.
    pub fn literals(self) -> ApiResult<Vec<GoalLiteral>> {
        match self {
            GoalInput::Text(t) => Ok(parse_goal(&t.replace(';', "\n"))?),
            GoalInput::Literals(l) => Ok(l),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MissionRequest {
    pub goal: GoalInput,
    #[serde(default)]
    pub requester: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MissionCreated {
    pub id: String,
    pub state: MissionState,
}

async fn mission_submit(
    State(d): State<Shared>,
    Json(req): Json<MissionRequest>,
) -> ApiResult<(StatusCode, Json<MissionCreated>)> {
    let goal = Goal {
        literals: req.goal.literals()?,
        requester: req.requester,
    };
    let tm = d.task_manager();
    let id = tm.submit_goal(goal)?;
    let state = tm.mission(&id)?.state;
    Ok((StatusCode::CREATED, Json(MissionCreated { id, state })))
}

async fn mission_list(State(d): State<Shared>) -> Json<Vec<MissionInfo>> {
    Json(d.task_manager().missions())
}

async fn mission_get(State(d): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<MissionInfo>> {
    Ok(Json(d.task_manager().mission(&id)?))
}

#[derive(Debug, Default, Deserialize)]
struct PddlQuery {
    goal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PddlTexts {
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    /// The optimal plan when a goal was given and one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<String>>,
}

/// Domain from the first manager's skills and the current world, plus the
/// problem and plan for an optional goal.
pub fn pddl_texts(d: &Deployment, goal: Option<&[GoalLiteral]>) -> ApiResult<PddlTexts> {
    let m = d
        .managers()
        .first()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_managers", "no skill manager is registered"))?;
    let snap = d.wm().snapshot();
    let pd = generate_domain(m.registry(), &snap);
    let domain = emit_domain(&pd.domain)?;
    let Some(goal) = goal else {
        return Ok(PddlTexts {
            domain,
            problem: None,
            plan: None,
        });
    };
    let problem = generate_problem(&pd, &snap, goal)?;
    let plan = plan(&pd.domain, &problem)
        .ok()
        .map(|p| p.steps.iter().map(|s| pd.summary(s)).collect());
    Ok(PddlTexts {
        domain,
        problem: Some(emit_problem(&problem)?),
        plan,
    })
}

async fn pddl(State(d): State<Shared>, Query(q): Query<PddlQuery>) -> ApiResult<Json<PddlTexts>> {
    let goal = q.goal.map(|g| GoalInput::Text(g).literals()).transpose()?;
    Ok(Json(pddl_texts(&d, goal.as_deref())?))
}

#[derive(Debug, Default, Deserialize)]
struct StepQuery {
    ticks: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Stepped {
    pub tick: u64,
}

/// Advances the clock by hand; refused while the realtime clock runs.
async fn clock_step(State(d): State<Shared>, Query(q): Query<StepQuery>) -> ApiResult<Json<Stepped>> {
    if d.clock_running() {
        return Err(ApiError::conflict("clock_running", "the realtime clock is running"));
    }
    let mut tick = d.tick();
    for _ in 0..q.ticks.unwrap_or(1) {
        tick = d.step().map_err(|e| ApiError::invalid("tick_failed", e.to_string()))?;
    }
    Ok(Json(Stepped { tick }))
}

#[derive(Debug, Default, Deserialize)]
struct EventsQuery {
    from: Option<u64>,
}

async fn events(State(d): State<Shared>, Query(q): Query<EventsQuery>, ws: WebSocketUpgrade) -> Response {
    let from = q.from.unwrap_or_else(|| d.hub().head());
    ws.on_upgrade(move |socket| stream_events(d, socket, from))
}

async fn stream_events(d: Shared, mut socket: WebSocket, from: u64) {
    let mut watch = d.hub().watch();
    let mut last = from;
    loop {
        watch.borrow_and_update();
        match d.hub().since(last) {
            Ok(batch) => {
                for e in batch {
                    let text = serde_json::to_string(&e).expect("events serialize");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                    last = e.seq;
                }
            }
            Err(t) => {
                let body = ApiError::new(
                    StatusCode::GONE,
                    "history_truncated",
                    format!("events after {} are no longer retained", t.requested),
                )
                .detail(serde_json::json!({ "requested": t.requested, "oldest": t.oldest }))
                .body;
                let text = serde_json::json!({ "error": body }).to_string();
                let _ = socket.send(Message::Text(text.into())).await;
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
        }
        tokio::select! {
            changed = watch.changed() => if changed.is_err() { return },
            msg = socket.recv() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
