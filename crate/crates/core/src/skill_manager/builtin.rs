//! Primitives every manager can run: a timer and two world-model edits.

use crate::bt::{Catalog, ExecCtx, Primitive, Step};
use crate::ontology::{vocab, Iri, RdfTerm};
use crate::skill::{parse_manifest, Bindings, SkillLibrary, Value};

pub const MANIFEST: &str = include_str!("../../assets/builtin.toml");

/// Descriptions of `wait`, `wm_move_object` and `wm_set_property`.
pub fn library() -> SkillLibrary {
    parse_manifest(MANIFEST).expect("bundled manifest parses")
}

pub fn catalog() -> Catalog {
    let mut c = Catalog::new();
    c.register("wait", Wait::default);
    c.register("wm_move_object", || WmMoveObject);
    c.register("wm_set_property", || WmSetProperty);
    c
}

/// Succeeds once `Duration` seconds of manager clock have elapsed since the
/// first execute.
#[derive(Debug, Default)]
pub struct Wait {
    started: Option<f64>,
}

const EPS: f64 = 1e-9;

impl Primitive for Wait {
    fn validate(&self, params: &Bindings) -> Result<(), String> {
        match params.get("Duration").and_then(Value::as_f64) {
            Some(d) if d >= 0.0 && d.is_finite() => Ok(()),
            Some(d) => Err(format!("Duration must be non-negative, got {d}")),
            None => Err("Duration is not a number".into()),
        }
    }

    fn on_start(&mut self, ctx: &mut ExecCtx<'_>) -> bool {
        self.started = Some(ctx.time);
        true
    }

    fn execute(&mut self, ctx: &mut ExecCtx<'_>) -> Step {
        let d = ctx.float("Duration").unwrap_or(0.0);
        let t0 = *self.started.get_or_insert(ctx.time);
        if ctx.time - t0 + EPS >= d {
            Step::Success
        } else {
            Step::Running
        }
    }
}

#[derive(Debug)]
pub struct WmMoveObject;

impl Primitive for WmMoveObject {
    fn execute(&mut self, ctx: &mut ExecCtx<'_>) -> Step {
        let keys = (ctx.element("StartLocation"), ctx.element("TargetLocation"), ctx.element("Object"));
        let (start, target, object) = match keys {
            (Ok(s), Ok(t), Ok(o)) => (s, t, o),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return Step::Failure(e),
        };
        if !ctx.snapshot().has_relation(&start, &vocab::contain(), &object) {
            return Step::Failure(format!("{object} is not in {start}"));
        }
        match ctx.commit(|wm| wm.move_element(&object, &target)) {
            Ok(_) => Step::Success,
            Err(e) => Step::Failure(e.to_string()),
        }
    }
}

#[derive(Debug)]
pub struct WmSetProperty;

impl Primitive for WmSetProperty {
    fn validate(&self, params: &Bindings) -> Result<(), String> {
        let p = params.get("Property").and_then(Value::as_str).unwrap_or("");
        Iri::parse(p).map(|_| ()).map_err(|e| format!("Property {p:?}: {e}"))
    }

    fn execute(&mut self, ctx: &mut ExecCtx<'_>) -> Step {
        let element = match ctx.element("Element") {
            Ok(e) => e,
            Err(e) => return Step::Failure(e),
        };
        let Some(property) = ctx.param("Property").and_then(Value::as_str).and_then(|p| Iri::parse(p).ok()) else {
            return Step::Failure("Property is not an IRI".into());
        };
        let value = ctx.param("Value").and_then(Value::as_str).unwrap_or_default().to_string();
        match ctx.commit(|wm| wm.set_property(&element, &property, vec![RdfTerm::Str(value)])) {
            Ok(_) => Step::Success,
            Err(e) => Step::Failure(e.to_string()),
        }
    }
}
