//! Runs the two-workstation pick-and-place mission in the simulator and
//! prints the plan steps as they were dispatched.

use rskill::planning::GoalLiteral;
use rskill::sim::{SimRunner, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut runner = SimRunner::new(&SimScenario::new("scene_two_ws.ttl"))?;
    let goal = vec![GoalLiteral::relation("skiros:contain", "skiros:locationB", "skiros:objectA")];
    let info = runner.run_mission(goal, 1000)?;
    for s in &info.steps {
        println!("{}. {} {:?} via {}", s.index + 1, s.summary, s.state, s.manager.as_deref().unwrap_or("-"));
    }
    println!("{} {:?} after {} replans, t={:.2}s", info.id, info.state, info.replans, runner.time());
    Ok(())
}
