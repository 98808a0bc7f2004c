//! Operator command line. Commands talk to a running service when
//! `--server` is given and otherwise run against an in-process deployment
//! stepped in lock step.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use reqwest::Method;
use rskill::ontology::{parse_turtle, serialize_turtle, Iri, RdfTerm};
use rskill::planning::{parse_goal, GoalLiteral, PlanError};
use rskill::skill::{Registry, Value};
use rskill::skill_manager::{TaskInfo, TaskState};
use rskill::task_manager::{Goal, MissionInfo, MissionState};
use rskill::world_model::WorldModel;

use crate::client::{Client, ClientError};
use crate::config::DeploymentConfig;
use crate::deployment::{load_libraries, load_ontology, Deployment};
use crate::error::ApiError;
use crate::routes::{
    element_tree, pddl_texts, skill_views, Committed, MissionCreated, PddlTexts, SkillView, TaskCreated, TaskDetail,
    TaskStopped, WmView,
};
use crate::ServiceError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(_) | ServiceError::Sim(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        let msg = format!("{} ({})", e.body.message, e.body.code);
        if e.status.as_u16() == 422 {
            CliError::Validation(msg)
        } else {
            CliError::Runtime(msg)
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "rskill", version, about = "Skill-based robot control: world model, skill managers, task planner")]
pub struct Cli {
    /// Base URL of a running service, e.g. http://127.0.0.1:7878
    #[arg(long, global = true, env = "RSKILL_SERVER")]
    pub server: Option<String>,
    /// Deployment config for in-process commands and `serve`
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start the world model, managers, task manager and API
    Serve {
        #[arg(long)]
        bind: Option<String>,
        /// Do not tick in real time; advance with POST /v1/clock/step
        #[arg(long)]
        no_clock: bool,
    },
    /// Inspect or modify the world model
    Wm {
        #[command(subcommand)]
        action: WmAction,
    },
    /// List, run and stop skills
    Skill {
        #[command(subcommand)]
        action: SkillAction,
    },
    /// Print the optimal plan for a goal file
    Plan {
        #[arg(long)]
        goal: PathBuf,
        /// Write domain.pddl and problem.pddl into this directory
        #[arg(long)]
        emit_pddl: Option<PathBuf>,
    },
    /// Submit and follow missions
    Mission {
        #[command(subcommand)]
        action: MissionAction,
    },
    /// Check ontology, scene and skill manifests
    Validate {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        ontology: Vec<PathBuf>,
        #[arg(long)]
        skills: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpFormat {
    Json,
    Turtle,
}

#[derive(Debug, Subcommand)]
pub enum WmAction {
    /// Print the world model
    Dump {
        #[arg(long, value_enum, default_value = "turtle")]
        format: DumpFormat,
        /// Past version to show (server only)
        #[arg(long)]
        version: Option<u64>,
    },
    /// Replace the scene with a Turtle file
    Load { file: PathBuf },
    /// Set a literal property: `wm set skiros:gripper1 skiros:ContainerState Empty`
    Set {
        element: String,
        property: String,
        value: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum SkillAction {
    List,
    /// Start a skill with KEY=VALUE parameters and wait for it to finish
    Run {
        skill: String,
        params: Vec<String>,
        #[arg(long)]
        manager: Option<String>,
        /// Return right after the start
        #[arg(long)]
        detach: bool,
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
    },
    /// Preempt a running task
    Stop { task: String },
}

#[derive(Debug, Subcommand)]
pub enum MissionAction {
    /// Submit a goal file
    Submit {
        #[arg(long)]
        goal: PathBuf,
        /// Do not wait for the mission to end (server only)
        #[arg(long)]
        detach: bool,
        #[arg(long, default_value_t = 120.0)]
        timeout: f64,
    },
    /// Follow a mission until it ends
    Watch {
        id: String,
        #[arg(long, default_value_t = 120.0)]
        timeout: f64,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn config(cli: &Cli) -> Result<DeploymentConfig, CliError> {
    match &cli.config {
        Some(p) => Ok(DeploymentConfig::load(p)?),
        None => Ok(DeploymentConfig::default()),
    }
}

fn local(cli: &Cli) -> Result<Deployment, CliError> {
    Ok(Deployment::build(&config(cli)?)?)
}

fn client(cli: &Cli) -> Result<Option<Client>, CliError> {
    cli.server.as_deref().map(Client::new).transpose().map_err(CliError::from)
}

fn need_server(cli: &Cli, what: &str) -> Result<Client, CliError> {
    client(cli)?.ok_or_else(|| CliError::Usage(format!("{what} needs --server")))
}

fn io(e: std::io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn goal_file(path: &Path) -> Result<Vec<GoalLiteral>, CliError> {
    parse_goal(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn json_line(out: &mut dyn Write, v: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out, "{text}").map_err(io)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Serve { bind, no_clock } => serve(cli, bind.clone(), *no_clock, out),
        Command::Wm { action } => wm(cli, action, out),
        Command::Skill { action } => skill(cli, action, out),
        Command::Plan { goal, emit_pddl } => plan(cli, goal, emit_pddl.as_deref(), out),
        Command::Mission { action } => mission(cli, action, out),
        Command::Validate { scene, ontology, skills } => validate(cli, scene.as_deref(), ontology, skills, out),
    }
}

fn serve(cli: &Cli, bind: Option<String>, no_clock: bool, out: &mut dyn Write) -> CliResult {
    let mut cfg = config(cli)?;
    if let Some(b) = bind {
        cfg.bind = b;
    }
    let d = Arc::new(Deployment::build(&cfg)?);
    if cfg.realtime && !no_clock {
        d.start_clock();
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .map_err(|e| CliError::Runtime(format!("bind {}: {e}", cfg.bind)))?;
        let addr = listener.local_addr().map_err(io)?;
        writeln!(out, "listening on http://{addr}").map_err(io)?;
        out.flush().map_err(io)?;
        axum::serve(listener, crate::routes::router(d.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(io)
    })?;
    d.stop_clock();
    Ok(())
}

fn wm(cli: &Cli, action: &WmAction, out: &mut dyn Write) -> CliResult {
    match action {
        WmAction::Dump { format, version } => {
            if let Some(c) = client(cli)? {
                let mut q = vec![(
                    "format",
                    match format {
                        DumpFormat::Json => "json".to_string(),
                        DumpFormat::Turtle => "turtle".to_string(),
                    },
                )];
                if let Some(v) = version {
                    q.push(("version", v.to_string()));
                }
                return match format {
                    DumpFormat::Json => json_line(out, &c.get_query::<serde_json::Value>("/v1/wm", &q)?),
                    DumpFormat::Turtle => write!(out, "{}", c.get_text("/v1/wm", &q)?).map_err(io),
                };
            }
            if version.is_some() {
                return Err(CliError::Usage("--version needs --server".into()));
            }
            let d = local(cli)?;
            let snap = d.wm().snapshot();
            match format {
                DumpFormat::Json => json_line(
                    out,
                    &WmView {
                        version: snap.version(),
                        root: rskill::ontology::vocab::scene_root(),
                        elements: element_tree(&snap),
                    },
                ),
                DumpFormat::Turtle => write!(out, "{}", serialize_turtle(snap.graph())).map_err(io),
            }
        }
        WmAction::Load { file } => {
            let text = read(file)?;
            parse_turtle(&text).map_err(|e| CliError::Validation(format!("{}: {e}", file.display())))?;
            let c = need_server(cli, "wm load")?;
            let r: Committed = c.put_text("/v1/wm/scene", text)?;
            writeln!(out, "version {}", r.version).map_err(io)
        }
        WmAction::Set { element, property, value } => {
            let c = need_server(cli, "wm set")?;
            let element = Iri::parse(element).map_err(|e| CliError::Validation(e.to_string()))?;
            let property = Iri::parse(property).map_err(|e| CliError::Validation(e.to_string()))?;
            let mut props = BTreeMap::new();
            props.insert(property, vec![literal(value)]);
            let body = serde_json::json!({ "properties": props });
            let r: Committed = c.send_json(Method::PATCH, &format!("/v1/wm/elements/{element}"), &body)?;
            writeln!(out, "version {}", r.version).map_err(io)
        }
    }
}

/// Literal from command-line text: numbers and booleans are typed, the
/// rest is a string.
fn literal(text: &str) -> RdfTerm {
    if let Ok(i) = text.parse::<i64>() {
        return RdfTerm::Int(i);
    }
    if let Some(f) = text.parse::<f64>().ok().and_then(RdfTerm::float) {
        return f;
    }
    match text {
        "true" => RdfTerm::Bool(true),
        "false" => RdfTerm::Bool(false),
        _ => RdfTerm::Str(text.to_string()),
    }
}

/// `KEY=VALUE` pairs; values are read as JSON when they parse, otherwise
/// as plain strings.
pub fn parse_params(pairs: &[String]) -> Result<BTreeMap<String, Value>, CliError> {
    let mut out = BTreeMap::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("parameter `{p}` is not KEY=VALUE")))?;
        let value = serde_json::from_str::<Value>(v).unwrap_or_else(|_| Value::Str(v.to_string()));
        out.insert(k.to_string(), value);
    }
    Ok(out)
}

fn print_task(out: &mut dyn Write, t: &TaskInfo) -> CliResult {
    write!(out, "{} {} {:?}", t.id, t.skill, t.state).map_err(io)?;
    if let Some(d) = &t.diagnostic {
        write!(out, " ({d})").map_err(io)?;
    }
    writeln!(out).map_err(io)
}

fn task_outcome(t: &TaskInfo) -> CliResult {
    match t.state {
        TaskState::Succeeded => Ok(()),
        s if s.is_terminal() => Err(CliError::Runtime(format!(
            "task {} ended {s:?}{}",
            t.id,
            t.diagnostic.as_ref().map(|d| format!(": {d}")).unwrap_or_default()
        ))),
        _ => Err(CliError::Runtime(format!("task {} did not finish in time", t.id))),
    }
}

fn skill(cli: &Cli, action: &SkillAction, out: &mut dyn Write) -> CliResult {
    match action {
        SkillAction::List => {
            let views: Vec<SkillView> = match client(cli)? {
                Some(c) => c.get("/v1/skills")?,
                None => skill_views(local(cli)?.managers()),
            };
            for v in views {
                let params: Vec<String> = v
                    .description
                    .params
                    .iter()
                    .map(|p| format!("{}:{}:{}", p.key, p.ty, p.flavor.name()))
                    .collect();
                let imps: Vec<&str> = v.implementations.iter().map(|i| i.name.as_str()).collect();
                writeln!(out, "{} ({}) [{}]", v.description.name, params.join(", "), imps.join(", ")).map_err(io)?;
            }
            Ok(())
        }
        SkillAction::Run {
            skill,
            params,
            manager,
            detach,
            timeout,
        } => {
            let params = parse_params(params)?;
            let deadline = Instant::now() + Duration::from_secs_f64(timeout.max(0.0));
            if let Some(c) = client(cli)? {
                let body = serde_json::json!({ "skill": skill, "params": params, "manager": manager });
                let t: TaskCreated = c.send_json(Method::POST, "/v1/tasks", &body)?;
                writeln!(out, "started {} on {} using {}", t.id, t.manager, t.implementation).map_err(io)?;
                if *detach {
                    return Ok(());
                }
                loop {
                    let d: TaskDetail = c.get(&format!("/v1/tasks/{}", t.id))?;
                    if d.info.state.is_terminal() || Instant::now() > deadline {
                        print_task(out, &d.info)?;
                        return task_outcome(&d.info);
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
            }
            let d = local(cli)?;
            let req = crate::routes::TaskRequest {
                skill: skill.clone(),
                params,
                manager: manager.clone(),
            };
            let m = crate::routes::pick_manager(&d, &req)?;
            let started = m.start_task(skill, req.params).map_err(ApiError::from)?;
            writeln!(out, "started {} on {} using {}", started.id, m.name(), started.implementation).map_err(io)?;
            let max_ticks = (timeout * d.config().rate).ceil() as u64;
            for _ in 0..max_ticks {
                if m.task(&started.id).map_err(ApiError::from)?.state.is_terminal() {
                    break;
                }
                d.step()?;
            }
            let info = m.task(&started.id).map_err(ApiError::from)?;
            print_task(out, &info)?;
            task_outcome(&info)
        }
        SkillAction::Stop { task } => {
            let c = need_server(cli, "skill stop")?;
            let r: TaskStopped = c.delete(&format!("/v1/tasks/{task}"))?;
            writeln!(out, "{} {:?}", r.id, r.state).map_err(io)
        }
    }
}

fn plan_error(e: PlanError) -> CliError {
    match e {
        PlanError::NoPlan | PlanError::ResourceLimit(_) => CliError::Runtime(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

fn plan(cli: &Cli, goal: &Path, emit: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let literals = goal_file(goal)?;
    let texts: PddlTexts = match client(cli)? {
        Some(c) => {
            let text: Vec<String> = literals.iter().map(|l| l.to_string()).collect();
            c.get_query("/v1/pddl", &[("goal", text.join(";"))])?
        }
        None => {
            let d = local(cli)?;
            pddl_texts(&d, Some(&literals)).map_err(|e| match e.body.code.as_str() {
                "no_plan" | "resource_limit" => CliError::Runtime(e.body.message),
                _ => CliError::Validation(e.body.message),
            })?
        }
    };
    if let Some(dir) = emit {
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("domain.pddl"), &texts.domain).map_err(io)?;
        std::fs::write(dir.join("problem.pddl"), texts.problem.as_deref().unwrap_or_default()).map_err(io)?;
    }
    let steps = texts.plan.ok_or_else(|| plan_error(PlanError::NoPlan))?;
    if steps.is_empty() {
        writeln!(out, "goal already holds; empty plan").map_err(io)?;
    }
    for (i, s) in steps.iter().enumerate() {
        writeln!(out, "{}. {s}", i + 1).map_err(io)?;
    }
    Ok(())
}

fn print_mission(out: &mut dyn Write, m: &MissionInfo) -> CliResult {
    for s in &m.steps {
        writeln!(out, "  {}. {} {:?}", s.index + 1, s.summary, s.state).map_err(io)?;
    }
    write!(out, "{} {:?} after {} replans", m.id, m.state, m.replans).map_err(io)?;
    if let Some(r) = &m.reason {
        write!(out, ": {r}").map_err(io)?;
    }
    writeln!(out).map_err(io)
}

fn mission_outcome(m: &MissionInfo) -> CliResult {
    match m.state {
        MissionState::Succeeded => Ok(()),
        s if s.is_terminal() => Err(CliError::Runtime(format!(
            "mission {} ended {s:?}{}",
            m.id,
            m.reason.as_ref().map(|r| format!(": {r}")).unwrap_or_default()
        ))),
        _ => Err(CliError::Runtime(format!("mission {} did not finish in time", m.id))),
    }
}

fn watch_remote(c: &Client, id: &str, timeout: f64, out: &mut dyn Write) -> CliResult {
    let deadline = Instant::now() + Duration::from_secs_f64(timeout.max(0.0));
    let mut seen = (None, 0usize);
    loop {
        let m: MissionInfo = c.get(&format!("/v1/missions/{id}"))?;
        let finished = m.steps.iter().filter(|s| s.state != rskill::task_manager::StepState::Running).count();
        if seen != (Some(m.state), finished) {
            writeln!(out, "{} {:?} ({finished}/{} steps settled)", m.id, m.state, m.steps.len()).map_err(io)?;
            seen = (Some(m.state), finished);
        }
        if m.state.is_terminal() || Instant::now() > deadline {
            print_mission(out, &m)?;
            return mission_outcome(&m);
        }
        std::thread::sleep(Duration::from_millis(50));
    }
}

fn mission(cli: &Cli, action: &MissionAction, out: &mut dyn Write) -> CliResult {
    match action {
        MissionAction::Submit { goal, detach, timeout } => {
            let literals = goal_file(goal)?;
            if let Some(c) = client(cli)? {
                let body = serde_json::json!({ "goal": literals });
                let r: MissionCreated = c.send_json(Method::POST, "/v1/missions", &body)?;
                writeln!(out, "submitted {} ({:?})", r.id, r.state).map_err(io)?;
                if *detach {
                    return Ok(());
                }
                return watch_remote(&c, &r.id, *timeout, out);
            }
            if *detach {
                return Err(CliError::Usage("--detach needs --server".into()));
            }
            let d = local(cli)?;
            let tm = d.task_manager();
            let id = tm.submit_goal(Goal::new(literals)).map_err(ApiError::from)?;
            let max_ticks = (timeout * d.config().rate).ceil() as u64;
            for _ in 0..max_ticks {
                if tm.mission(&id).map_err(ApiError::from)?.state.is_terminal() {
                    break;
                }
                d.step()?;
            }
            let m = tm.mission(&id).map_err(ApiError::from)?;
            print_mission(out, &m)?;
            writeln!(out, "simulated {:.2} s in {} ticks", d.time(), d.tick()).map_err(io)?;
            mission_outcome(&m)
        }
        MissionAction::Watch { id, timeout } => {
            let c = need_server(cli, "mission watch")?;
            watch_remote(&c, id, *timeout, out)
        }
    }
}

fn validate(cli: &Cli, scene: Option<&Path>, ontology: &[PathBuf], skills: &[PathBuf], out: &mut dyn Write) -> CliResult {
    let mut cfg = config(cli)?;
    if let Some(s) = scene {
        cfg.scene = s.to_string_lossy().into_owned();
    }
    cfg.ontologies.extend(ontology.iter().cloned());
    cfg.skills.extend(skills.iter().cloned());
    let fail = |m: String| CliError::Validation(m);
    let onto = load_ontology(&cfg).map_err(|e| fail(e.to_string()))?;
    writeln!(out, "ontology: {} triples, {} concepts", onto.len(), onto.concepts().len()).map_err(io)?;
    let scenario = cfg.scenario();
    let text = scenario.scene_text().map_err(|e| fail(e.to_string()))?;
    let scene_graph = parse_turtle(&text).map_err(|e| fail(format!("{}: {e}", cfg.scene)))?;
    let wm = WorldModel::with_scene(onto, &scene_graph).map_err(|e| fail(format!("{}: {e}", cfg.scene)))?;
    let snap = wm.snapshot();
    writeln!(out, "scene: {} elements", snap.element_ids().len()).map_err(io)?;
    let libs = load_libraries(&cfg).map_err(|e| fail(e.to_string()))?;
    let registry = Registry::build(&libs, snap.graph()).map_err(|e| fail(e.to_string()))?;
    let catalog = rskill::sim::catalog(&cfg.durations);
    let mut problems = Vec::new();
    for i in registry.implementations() {
        if let rskill::skill::ImplBody::Primitive { factory } = &i.body {
            if catalog.get(factory).is_none() {
                problems.push(format!("implementation {} uses unknown primitive {factory}", i.name));
            }
        }
    }
    if !problems.is_empty() {
        return Err(fail(problems.join("\n")));
    }
    writeln!(
        out,
        "skills: {} descriptions, {} implementations",
        registry.descriptions().count(),
        registry.implementations().count()
    )
    .map_err(io)?;
    writeln!(out, "ok").map_err(io)
}
