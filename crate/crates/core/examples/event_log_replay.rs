//! Subscribes to world-model changes while a mission runs and rebuilds the
//! final graph from the initial one plus the streamed events.

use rskill::planning::GoalLiteral;
use rskill::sim::{SimRunner, SimScenario};
use rskill::world_model::replay;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut runner = SimRunner::new(&SimScenario::new("scene_two_ws.ttl"))?;
    let base = runner.wm().snapshot().graph().clone();
    let sub = runner.wm().subscribe(None)?;
    let goal = vec![GoalLiteral::relation("skiros:contain", "skiros:locationB", "skiros:objectA")];
    runner.run_mission(goal, 1000)?;
    let events = sub.drain();
    for e in &events {
        let object = e.object.as_ref().map(|o| o.to_string()).unwrap_or_default();
        println!("v{} {:?} {} {} {object}", e.version, e.kind, e.subject, e.predicate.as_ref().map(|p| p.to_string()).unwrap_or_default());
    }
    let rebuilt = replay(&base, &events)?;
    println!("{} events, replay matches final state: {}", events.len(), rebuilt == *runner.wm().snapshot().graph());
    Ok(())
}
