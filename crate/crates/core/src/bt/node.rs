use serde::{Deserialize, Serialize};

use super::primitive::{ExecCtx, Factory, Primitive, Step};
use super::{Diagnostic, NodeState, Phase, Processor};
use crate::skill::{complete_bindings, Bindings, Blackboard, ConditionSpec, Flavor, Scope, SkillDescription, ROBOT_KEY};
use crate::world_model::{WmServer, WmSnapshot};

/// A leaf whose result is recomputed on every tick. Used for custom checks
/// and test stubs.
pub trait Action: Send {
    fn tick(&mut self, ctx: &mut TickCtx<'_>) -> NodeState;

    fn preempt(&mut self) {}
}

/// One node-state change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub tick: u64,
    pub path: String,
    pub node: String,
    pub state: NodeState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<Diagnostic>,
}

/// Everything a tick needs besides the tree itself.
pub struct TickCtx<'a> {
    pub wm: &'a WmServer,
    /// One view per tick, refreshed only after this task's own commits.
    pub snapshot: WmSnapshot,
    pub bb: &'a mut Blackboard,
    pub tick: u64,
    pub time: f64,
    pub dt: f64,
    pub transcript: Option<&'a mut Vec<TranscriptEntry>>,
}

impl<'a> TickCtx<'a> {
    pub fn new(wm: &'a WmServer, bb: &'a mut Blackboard, tick: u64, rate: f64) -> Self {
        TickCtx {
            snapshot: wm.snapshot(),
            wm,
            bb,
            tick,
            time: (tick.saturating_sub(1)) as f64 / rate,
            dt: 1.0 / rate,
            transcript: None,
        }
    }

    pub fn with_transcript(mut self, t: &'a mut Vec<TranscriptEntry>) -> Self {
        self.transcript = Some(t);
        self
    }

    fn record(&mut self, path: &str, node: &str, state: NodeState, diag: Option<&Diagnostic>) {
        if let Some(t) = self.transcript.as_deref_mut() {
            t.push(TranscriptEntry {
                tick: self.tick,
                path: path.to_string(),
                node: node.to_string(),
                state,
                diagnostic: diag.cloned(),
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lifecycle {
    Idle,
    Active,
    Done,
}

pub(crate) struct PrimitiveSlot {
    pub(crate) factory: Factory,
    pub(crate) instance: Option<Box<dyn Primitive>>,
    lifecycle: Lifecycle,
}

impl PrimitiveSlot {
    pub(crate) fn new(factory: Factory) -> Self {
        PrimitiveSlot {
            factory,
            instance: None,
            lifecycle: Lifecycle::Idle,
        }
    }
}

pub(crate) enum Body {
    Primitive(PrimitiveSlot),
    Tree(Box<BtNode>),
}

pub(crate) struct CondNode {
    pub(crate) spec: ConditionSpec,
    pub(crate) phase: Phase,
    pub(crate) last: Option<NodeState>,
}

pub(crate) struct SkillLeaf {
    pub(crate) skill: String,
    pub(crate) implementation: String,
    pub(crate) description: SkillDescription,
    pub(crate) scope: Scope,
    pub(crate) bindings: Bindings,
    pub(crate) pre: Vec<CondNode>,
    pub(crate) hold: Vec<CondNode>,
    pub(crate) post: Vec<CondNode>,
    pub(crate) body: Body,
    active: bool,
}

pub(crate) enum NodeKind {
    Processor { processor: Processor, children: Vec<BtNode> },
    Skill(Box<SkillLeaf>),
    Condition { spec: ConditionSpec, scope: Scope },
    Action(Box<dyn Action>),
}

/// A node of an executable tree.
pub struct BtNode {
    pub(crate) name: String,
    pub(crate) kind: NodeKind,
    state: Option<NodeState>,
    diagnostic: Option<Diagnostic>,
}

/// Serializable view of a tree for live monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDump {
    pub kind: String,
    pub name: String,
    /// `None` until the node is first ticked.
    pub state: Option<NodeState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeDump>,
}

impl std::fmt::Debug for BtNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.dump())
    }
}

fn child_path(path: &str, i: usize) -> String {
    if path.is_empty() {
        i.to_string()
    } else {
        format!("{path}/{i}")
    }
}

impl BtNode {
    fn with_kind(name: &str, kind: NodeKind) -> Self {
        BtNode {
            name: name.to_string(),
            kind,
            state: None,
            diagnostic: None,
        }
    }

    pub fn processor(processor: Processor, children: Vec<BtNode>) -> Self {
        Self::with_kind(processor.name(), NodeKind::Processor { processor, children })
    }

    pub fn sequential(children: Vec<BtNode>) -> Self {
        Self::processor(Processor::Sequential, children)
    }

    pub fn action(name: &str, a: impl Action + 'static) -> Self {
        Self::with_kind(name, NodeKind::Action(Box::new(a)))
    }

    /// Stand-alone condition check resolved through `scope`.
    pub fn condition(spec: ConditionSpec, scope: Scope) -> Self {
        let name = spec.name().to_string();
        Self::with_kind(&name, NodeKind::Condition { spec, scope })
    }

    pub(crate) fn skill(leaf: SkillLeaf) -> Self {
        let name = leaf.skill.clone();
        Self::with_kind(&name, NodeKind::Skill(Box::new(leaf)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state(&self) -> Option<NodeState> {
        self.state
    }

    pub fn diagnostic(&self) -> Option<&Diagnostic> {
        self.diagnostic.as_ref()
    }

    pub fn children(&self) -> &[BtNode] {
        match &self.kind {
            NodeKind::Processor { children, .. } => children,
            _ => &[],
        }
    }

    /// Implementation chosen for a skill node.
    pub fn implementation(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Skill(l) => Some(&l.implementation),
            _ => None,
        }
    }

    /// Bindings a skill node resolved (at expansion, refreshed on activation).
    pub fn bindings(&self) -> Option<&Bindings> {
        match &self.kind {
            NodeKind::Skill(l) => Some(&l.bindings),
            _ => None,
        }
    }

    /// Compound body of a skill node.
    pub fn subtree(&self) -> Option<&BtNode> {
        match &self.kind {
            NodeKind::Skill(l) => match &l.body {
                Body::Tree(t) => Some(t),
                Body::Primitive(_) => None,
            },
            _ => None,
        }
    }

    fn is_terminal(&self) -> bool {
        matches!(self.state, Some(NodeState::Success | NodeState::Failure))
    }

    fn set(&mut self, ctx: &mut TickCtx<'_>, path: &str, state: NodeState, diag: Option<Diagnostic>) -> NodeState {
        if self.state != Some(state) || self.diagnostic != diag {
            ctx.record(path, &self.name, state, diag.as_ref());
        }
        self.state = Some(state);
        self.diagnostic = diag;
        state
    }

    /// Ticks the tree rooted here.
    pub fn tick(&mut self, ctx: &mut TickCtx<'_>) -> NodeState {
        self.tick_at(ctx, "")
    }

    fn tick_at(&mut self, ctx: &mut TickCtx<'_>, path: &str) -> NodeState {
        match &mut self.kind {
            NodeKind::Processor { processor, children } => {
                let processor = *processor;
                let (state, diag) = tick_processor(processor, children, ctx, path);
                self.set(ctx, path, state, diag)
            }
            NodeKind::Action(a) => {
                let s = a.tick(ctx);
                self.set(ctx, path, s, None)
            }
            NodeKind::Condition { spec, scope } => {
                let (s, d) = eval_standalone(spec, scope, ctx);
                self.set(ctx, path, s, d)
            }
            NodeKind::Skill(_) => {
                if self.is_terminal() {
                    return self.state.expect("terminal");
                }
                let NodeKind::Skill(leaf) = &mut self.kind else { unreachable!() };
                let (s, d) = tick_skill(leaf, ctx, path);
                self.set(ctx, path, s, d)
            }
        }
    }

    /// Stops every active descendant depth-first. Terminal nodes are left
    /// untouched.
    pub fn preempt(&mut self, ctx: &mut TickCtx<'_>) {
        self.preempt_at(ctx, "")
    }

    fn preempt_at(&mut self, ctx: &mut TickCtx<'_>, path: &str) {
        if self.is_terminal() || self.state.is_none() {
            return;
        }
        match &mut self.kind {
            NodeKind::Processor { children, .. } => {
                for (i, c) in children.iter_mut().enumerate() {
                    c.preempt_at(ctx, &child_path(path, i));
                }
            }
            NodeKind::Action(a) => a.preempt(),
            NodeKind::Condition { .. } => {}
            NodeKind::Skill(leaf) => preempt_skill(leaf, ctx, path),
        }
        self.set(ctx, path, NodeState::Failure, Some(Diagnostic::Preempted));
    }

    pub fn dump(&self) -> NodeDump {
        let (kind, detail, children) = match &self.kind {
            NodeKind::Processor { children, .. } => {
                ("processor", None, children.iter().map(BtNode::dump).collect())
            }
            NodeKind::Action(_) => ("action", None, Vec::new()),
            NodeKind::Condition { .. } => ("condition", None, Vec::new()),
            NodeKind::Skill(leaf) => {
                let cond = |c: &CondNode| NodeDump {
                    kind: "condition".into(),
                    name: c.spec.name().to_string(),
                    state: c.last,
                    diagnostic: None,
                    detail: Some(c.phase.name().to_string()),
                    children: Vec::new(),
                };
                let mut v: Vec<NodeDump> = leaf.pre.iter().chain(&leaf.hold).map(cond).collect();
                v.push(match &leaf.body {
                    Body::Tree(t) => t.dump(),
                    Body::Primitive(p) => NodeDump {
                        kind: "primitive".into(),
                        name: leaf.implementation.clone(),
                        state: match p.lifecycle {
                            Lifecycle::Idle => None,
                            Lifecycle::Active => Some(NodeState::Running),
                            Lifecycle::Done => self.state,
                        },
                        diagnostic: None,
                        detail: None,
                        children: Vec::new(),
                    },
                });
                v.extend(leaf.post.iter().map(cond));
                ("skill", Some(leaf.implementation.clone()), v)
            }
        };
        NodeDump {
            kind: kind.into(),
            name: self.name.clone(),
            state: self.state,
            diagnostic: self.diagnostic.clone(),
            detail,
            children,
        }
    }
}

fn tick_processor(
    processor: Processor,
    children: &mut [BtNode],
    ctx: &mut TickCtx<'_>,
    path: &str,
) -> (NodeState, Option<Diagnostic>) {
    use NodeState::*;
    let n = children.len();
    let mut ticked = vec![false; n];
    let mut result: Option<(NodeState, Option<Diagnostic>)> = None;
    match processor {
        Processor::Sequential | Processor::Selector => {
            let (stop_on, fallthrough) = if processor == Processor::Sequential {
                (Failure, Success)
            } else {
                (Success, Failure)
            };
            for (i, c) in children.iter_mut().enumerate() {
                ticked[i] = true;
                let s = c.tick_at(ctx, &child_path(path, i));
                if s == Running || s == stop_on {
                    result = Some((s, c.diagnostic.clone()));
                    break;
                }
            }
            let result = result.unwrap_or((fallthrough, None));
            (result.0, result.1)
        }
        Processor::ParallelFirstFail | Processor::ParallelFirstSuccess => {
            let decisive = if processor == Processor::ParallelFirstFail {
                Failure
            } else {
                Success
            };
            let mut any_running = false;
            for (i, c) in children.iter_mut().enumerate() {
                ticked[i] = true;
                let s = c.tick_at(ctx, &child_path(path, i));
                if s == decisive && result.is_none() {
                    result = Some((s, c.diagnostic.clone()));
                }
                any_running |= s == Running;
            }
            match result {
                Some(r) => r,
                None if any_running => (Running, None),
                None if processor == Processor::ParallelFirstFail => (Success, None),
                None => (Failure, children.iter().find_map(|c| c.diagnostic.clone())),
            }
        }
    }
    .pipe(|(state, diag)| {
        for (i, c) in children.iter_mut().enumerate() {
            let stale = !ticked[i] || state != Running;
            if stale && c.state == Some(Running) {
                c.preempt_at(ctx, &child_path(path, i));
            }
        }
        (state, diag)
    })
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}

impl<T> Pipe for T {}

fn eval_standalone(spec: &ConditionSpec, scope: &Scope, ctx: &TickCtx<'_>) -> (NodeState, Option<Diagnostic>) {
    let mut b = Bindings::new();
    for k in spec.keys() {
        if let Ok(v) = ctx.bb.get(scope, k) {
            b.insert(k.to_string(), v);
        }
    }
    match spec.evaluate(&b, &ctx.snapshot) {
        Ok(true) => (NodeState::Success, None),
        Ok(false) => (NodeState::Failure, Some(Diagnostic::Failed(spec.name().to_string()))),
        Err(e) => (NodeState::Failure, Some(Diagnostic::Error(e.to_string()))),
    }
}

/// Resolves every key of the description through the blackboard, filling
/// defaults and inferring what is still open.
pub(crate) fn resolve_bindings(
    d: &SkillDescription,
    scope: &Scope,
    bb: &Blackboard,
    wm: &WmSnapshot,
) -> Result<Bindings, String> {
    let mut b = Bindings::new();
    for p in &d.params {
        match bb.get(scope, &p.key) {
            Ok(v) => {
                let v = v.coerce(&p.ty).map_err(|e| format!("{}: {e}", p.key))?;
                b.insert(p.key.clone(), v);
            }
            Err(_) => {
                if let Some(def) = &p.default {
                    b.insert(p.key.clone(), def.clone());
                } else if p.flavor == Flavor::Optional && p.concept().is_none() {
                    return Err(format!("optional parameter {} has no value and no default", p.key));
                }
            }
        }
    }
    if d.param(ROBOT_KEY).is_none() {
        if let Ok(v) = bb.get(scope, ROBOT_KEY) {
            b.insert(ROBOT_KEY.to_string(), v);
        }
    }
    complete_bindings(d, &b, wm).map_err(|e| e.to_string())
}

/// Evaluates conditions in order; returns the first that fails.
fn first_failing(
    conds: &mut [CondNode],
    b: &Bindings,
    wm: &WmSnapshot,
) -> Result<Option<String>, String> {
    for c in conds.iter_mut() {
        match c.spec.evaluate(b, wm) {
            Ok(true) => c.last = Some(NodeState::Success),
            Ok(false) => {
                c.last = Some(NodeState::Failure);
                return Ok(Some(c.spec.name().to_string()));
            }
            Err(e) => {
                c.last = Some(NodeState::Failure);
                return Err(format!("{}: {e}", c.spec.name()));
            }
        }
    }
    Ok(None)
}

fn exec_ctx<'b>(
    leaf_bindings: &'b Bindings,
    scope: &'b Scope,
    ctx: &'b mut TickCtx<'_>,
) -> ExecCtx<'b> {
    ExecCtx {
        params: leaf_bindings,
        wm: ctx.wm,
        snapshot: &mut ctx.snapshot,
        bb: &mut *ctx.bb,
        scope,
        tick: ctx.tick,
        time: ctx.time,
        dt: ctx.dt,
    }
}

fn tick_skill(leaf: &mut SkillLeaf, ctx: &mut TickCtx<'_>, path: &str) -> (NodeState, Option<Diagnostic>) {
    use NodeState::*;
    let fail = |d: Diagnostic| (Failure, Some(d));
    if !leaf.active {
        match resolve_bindings(&leaf.description, &leaf.scope, ctx.bb, &ctx.snapshot) {
            Ok(b) => leaf.bindings = b,
            Err(e) => return fail(Diagnostic::Error(e)),
        }
        for (k, v) in &leaf.bindings {
            if ctx.bb.try_get(&leaf.scope, k).is_none() {
                ctx.bb.set(&leaf.scope, k, v.clone());
            }
        }
        match first_failing(&mut leaf.pre, &leaf.bindings, &ctx.snapshot) {
            Ok(None) => {}
            Ok(Some(name)) => return fail(Diagnostic::PreconditionViolated(name)),
            Err(e) => return fail(Diagnostic::Error(e)),
        }
        if let Body::Primitive(p) = &mut leaf.body {
            let inst = (p.factory)();
            if let Err(e) = inst.validate(&leaf.bindings) {
                return fail(Diagnostic::Error(e));
            }
            p.instance = Some(inst);
        }
        leaf.active = true;
    }
    match first_failing(&mut leaf.hold, &leaf.bindings, &ctx.snapshot) {
        Ok(None) => {}
        Ok(Some(name)) => {
            stop_body(leaf, ctx, path);
            return fail(Diagnostic::HoldViolated(name));
        }
        Err(e) => {
            stop_body(leaf, ctx, path);
            return fail(Diagnostic::Error(e));
        }
    }
    let body_path = child_path(path, leaf.pre.len() + leaf.hold.len());
    let (state, diag) = match &mut leaf.body {
        Body::Tree(t) => {
            let s = t.tick_at(ctx, &body_path);
            (s, t.diagnostic.clone())
        }
        Body::Primitive(slot) => {
            let mut inst = slot.instance.take().expect("instance created on activation");
            let mut ectx = exec_ctx(&leaf.bindings, &leaf.scope, ctx);
            if slot.lifecycle == Lifecycle::Idle {
                slot.lifecycle = Lifecycle::Active;
                if !inst.on_start(&mut ectx) {
                    inst.on_end(&mut ectx);
                    slot.lifecycle = Lifecycle::Done;
                    slot.instance = Some(inst);
                    return fail(Diagnostic::Failed("on_start refused".into()));
                }
            }
            let step = inst.execute(&mut ectx);
            let out = match step {
                Step::Running => (Running, None),
                Step::Success => (Success, None),
                Step::Failure(m) => (Failure, Some(Diagnostic::Failed(m))),
            };
            if out.0 != Running {
                inst.on_end(&mut ectx);
                slot.lifecycle = Lifecycle::Done;
            }
            slot.instance = Some(inst);
            out
        }
    };
    match state {
        Running => (Running, None),
        Failure => (Failure, diag),
        Success => match first_failing(&mut leaf.post, &leaf.bindings, &ctx.snapshot) {
            Ok(None) => (Success, None),
            Ok(Some(name)) => fail(Diagnostic::PostconditionViolated(name)),
            Err(e) => fail(Diagnostic::Error(e)),
        },
    }
}

fn stop_body(leaf: &mut SkillLeaf, ctx: &mut TickCtx<'_>, path: &str) {
    let body_path = child_path(path, leaf.pre.len() + leaf.hold.len());
    match &mut leaf.body {
        Body::Tree(t) => t.preempt_at(ctx, &body_path),
        Body::Primitive(slot) => {
            if slot.lifecycle == Lifecycle::Active {
                if let Some(mut inst) = slot.instance.take() {
                    let mut ectx = exec_ctx(&leaf.bindings, &leaf.scope, ctx);
                    inst.on_preempt(&mut ectx);
                    inst.on_end(&mut ectx);
                    slot.instance = Some(inst);
                }
                slot.lifecycle = Lifecycle::Done;
            }
        }
    }
}

fn preempt_skill(leaf: &mut SkillLeaf, ctx: &mut TickCtx<'_>, path: &str) {
    if leaf.active {
        stop_body(leaf, ctx, path);
    }
}

impl SkillLeaf {
    pub(crate) fn new(
        skill: String,
        implementation: String,
        description: SkillDescription,
        scope: Scope,
        bindings: Bindings,
        body: Body,
    ) -> Self {
        let conds = |v: &[ConditionSpec], phase| {
            v.iter()
                .map(|c| CondNode {
                    spec: c.clone(),
                    phase,
                    last: None,
                })
                .collect()
        };
        SkillLeaf {
            pre: conds(&description.pre, Phase::Pre),
            hold: conds(&description.hold, Phase::Hold),
            post: conds(&description.post, Phase::Post),
            skill,
            implementation,
            description,
            scope,
            bindings,
            body,
            active: false,
        }
    }
}
