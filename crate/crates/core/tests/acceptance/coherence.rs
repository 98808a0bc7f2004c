use std::collections::BTreeMap;
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rskill::bt::{Catalog, ExecCtx, Primitive, Step};
use rskill::ontology::{base_ontology, parse_turtle, vocab, Iri, RdfTerm};
use rskill::skill::parse_manifest;
use rskill::skill_manager::{ManagerConfig, SkillManager, TaskState};
use rskill::world_model::{replay, ChangeEvent, NewElement, WmServer, WorldModel};

use super::Outcome;

const COMMITS_PER_MANAGER: u64 = 500;

const SCENE: &str = r#"
@prefix skiros: <http://rvmi.aau.dk/ontologies/skiros.owl#> .
skiros:robot1 a skiros:Robot ; skiros:at skiros:dock .
skiros:robot2 a skiros:Robot ; skiros:at skiros:dock .
skiros:dock a skiros:Location .
skiros:shelf a skiros:Location .
skiros:bench a skiros:Workstation .
skiros:crate a skiros:Product .
skiros:bench skiros:contain skiros:crate .
"#;

const LIB: &str = r#"
[[skill]]
name = "scribble"

[[primitive]]
name = "scribble_impl"
implements = "scribble"
factory = "scribbler"
"#;

struct Scribbler {
    done: u64,
    rng: ChaCha8Rng,
    spawned: Vec<Iri>,
}

impl Primitive for Scribbler {
    fn execute(&mut self, ctx: &mut ExecCtx<'_>) -> Step {
        let robot = match ctx.element("Robot") {
            Ok(r) => r,
            Err(e) => return Step::Failure(e),
        };
        self.done += 1;
        let n = self.done as i64;
        let places = [Iri::must("skiros:dock"), Iri::must("skiros:shelf"), Iri::must("skiros:bench")];
        let choice = self.rng.gen_range(0..5);
        let spawned = &mut self.spawned;
        let rng = &mut self.rng;
        let r = ctx.commit(|m| match choice {
            0 => m.set_property(&robot, &Iri::must("skiros:Counter"), vec![RdfTerm::Int(n)]),
            1 => {
                let crate_ = Iri::must("skiros:crate");
                let cur = m.snapshot().parent(&crate_);
                let to = places.iter().find(|p| Some(*p) != cur.as_ref()).unwrap().clone();
                m.move_element(&crate_, &to)
            }
            2 => {
                let cur = m.snapshot().graph().objects(&robot, &vocab::at()).next().and_then(|t| t.as_iri().cloned());
                let to = places.iter().find(|p| Some(*p) != cur.as_ref()).unwrap().clone();
                m.set_relation(&robot, &vocab::at(), &to, true)
            }
            3 if !spawned.is_empty() => {
                let i = rng.gen_range(0..spawned.len());
                let id = spawned.swap_remove(i);
                m.remove_element(&id)
            }
            _ => {
                let e = NewElement::of_type(vocab::product())
                    .label(format!("{}-{n}", robot.local()))
                    .parent(places.choose(rng).unwrap().clone());
                let id = m.add_element(e)?;
                spawned.push(id);
                Ok(m.version())
            }
        });
        if let Err(e) = r {
            return Step::Failure(e.to_string());
        }
        if self.done >= COMMITS_PER_MANAGER {
            Step::Success
        } else {
            Step::Running
        }
    }
}

pub fn criterion() -> Outcome {
    let scene = parse_turtle(SCENE).map_err(|e| e.to_string())?;
    let wm = WmServer::new(WorldModel::with_scene(base_ontology(), &scene).map_err(|e| e.to_string())?);
    let lib = parse_manifest(LIB).map_err(|e| e.to_string())?;
    let mut managers = Vec::new();
    for (i, name) in ["robot1", "robot2"].iter().enumerate() {
        let mut catalog = Catalog::new();
        let seed = 0x5eed_0011 + i as u64;
        catalog.register("scribbler", move || Scribbler {
            done: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spawned: Vec::new(),
        });
        let cfg = ManagerConfig::new(name, Iri::must(&format!("skiros:{name}")));
        managers.push(SkillManager::new(cfg, wm.clone(), std::slice::from_ref(&lib), catalog).map_err(|e| e.to_string())?);
    }
    let v0 = wm.version();
    let base = wm.snapshot().graph().clone();
    let early = wm.subscribe(None).map_err(|e| e.to_string())?;
    let tasks: Vec<String> = managers
        .iter()
        .map(|m| m.start_task("scribble", BTreeMap::new()).map(|t| t.id))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let workers: Vec<_> = managers
        .iter()
        .cloned()
        .zip(tasks.clone())
        .map(|(m, id)| {
            thread::spawn(move || {
                for _ in 0..100 * COMMITS_PER_MANAGER {
                    m.step();
                    if m.task(&id).unwrap().state.is_terminal() {
                        break;
                    }
                }
                m.task(&id).unwrap()
            })
        })
        .collect();
    thread::sleep(Duration::from_millis(2));
    let late = wm.subscribe(Some(v0)).map_err(|e| e.to_string())?;
    for w in workers {
        let info = w.join().map_err(|_| "worker panicked".to_string())?;
        if info.state != TaskState::Succeeded {
            return Err(format!("task {} ended {:?}: {:?}", info.id, info.state, info.diagnostic));
        }
    }
    let head = wm.version();
    let a: Vec<ChangeEvent> = early.drain();
    let b: Vec<ChangeEvent> = late.drain();
    let commits = head - v0;
    if commits != 2 * COMMITS_PER_MANAGER {
        return Err(format!("{commits} commits, expected {}", 2 * COMMITS_PER_MANAGER));
    }
    if a != b {
        return Err(format!("subscribers differ ({} vs {} events)", a.len(), b.len()));
    }
    let versions: Vec<u64> = a.iter().map(|e| e.version).collect();
    if versions != (v0 + 1..=head).collect::<Vec<_>>() {
        return Err("version log has gaps or reordering".into());
    }
    let replayed = replay(&base, &a).map_err(|e| e.to_string())?;
    if replayed != *wm.snapshot().graph() {
        return Err("replaying the version log does not reproduce the final state".into());
    }
    let history = wm.read(|m| m.events_since(v0)).map_err(|e| e.to_string())?;
    if history != a {
        return Err("server history differs from the streamed log".into());
    }
    let switches = a
        .windows(2)
        .filter(|w| owner(&w[0]) != owner(&w[1]))
        .count();
    Ok(format!(
        "{commits} commits from two managers ({switches} manager switches in the log), both subscribers identical, replay equals final state"
    ))
}

/// Which robot's task produced the event, judged by the touched element.
fn owner(e: &ChangeEvent) -> Option<String> {
    for s in [Some(&e.subject), e.object.as_ref()].into_iter().flatten() {
        if s.local().starts_with("robot") {
            return Some(s.local().to_string());
        }
    }
    e.delta.iter().find_map(|d| match d {
        rskill::world_model::TripleDelta::Added(t) => match &t.object {
            RdfTerm::Str(l) => l.split('-').next().map(str::to_string),
            _ => None,
        },
        _ => None,
    })
}
