//! Registers a primitive skill from a manifest and a Rust factory, then
//! runs it on a single skill manager.

use std::collections::BTreeMap;

use rskill::bt::{Catalog, ExecCtx, Primitive, Step};
use rskill::ontology::{base_ontology, parse_turtle, Iri, RdfTerm};
use rskill::skill::{parse_manifest, Value};
use rskill::skill_manager::{ManagerConfig, SkillManager};
use rskill::world_model::{WmServer, WorldModel};

const SCENE: &str = r#"
@prefix skiros: <http://rvmi.aau.dk/ontologies/skiros.owl#> .
skiros:robot1 a skiros:Robot .
skiros:bench a skiros:Workstation .
"#;

const LIB: &str = r#"
[[skill]]
name = "count"
[[skill.param]]
key = "Target"
type = "skiros:Location"
flavor = "required"
[[skill.param]]
key = "Times"
type = "int"
flavor = "required"

[[primitive]]
name = "count_impl"
implements = "count"
factory = "counter"
"#;

#[derive(Default)]
struct Counter {
    n: i64,
}

impl Primitive for Counter {
    fn execute(&mut self, ctx: &mut ExecCtx<'_>) -> Step {
        let target = match ctx.element("Target") {
            Ok(t) => t,
            Err(e) => return Step::Failure(e),
        };
        let times = match ctx.param("Times") {
            Some(Value::Int(t)) => *t,
            _ => return Step::Failure("Times must be an int".into()),
        };
        self.n += 1;
        let n = self.n;
        if let Err(e) = ctx.commit(|m| m.set_property(&target, &Iri::must("skiros:Visits"), vec![RdfTerm::Int(n)])) {
            return Step::Failure(e.to_string());
        }
        if n >= times {
            Step::Success
        } else {
            Step::Running
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = parse_turtle(SCENE)?;
    let wm = WmServer::new(WorldModel::with_scene(base_ontology(), &scene)?);
    let mut catalog = Catalog::new();
    catalog.register("counter", Counter::default);
    let cfg = ManagerConfig::new("robot1", Iri::must("skiros:robot1"));
    let manager = SkillManager::new(cfg, wm.clone(), &[parse_manifest(LIB)?], catalog)?;
    let params = BTreeMap::from([
        ("Target".to_string(), Value::Element(Iri::must("skiros:bench"))),
        ("Times".to_string(), Value::Int(3)),
    ]);
    let task = manager.start_task("count", params)?;
    let info = manager.run_task(&task.id, 10)?;
    println!("{} {:?} at tick {:?}", info.id, info.state, info.finished);
    let visits = wm.snapshot().graph().objects(&Iri::must("skiros:bench"), &Iri::must("skiros:Visits")).next().cloned();
    println!("bench Visits = {visits:?}");
    for e in manager.transcript(&task.id)? {
        println!("tick {} {} {:?}", e.tick, e.path, e.state);
    }
    Ok(())
}
