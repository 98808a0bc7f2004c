//! Knocks the object back onto workstationA while the robot is driving
//! away with it, forcing the task manager to replan.

use rskill::planning::GoalLiteral;
use rskill::sim::{SimRunner, SimScenario};

const SCENARIO: &str = r#"
scene = "scene_two_ws.ttl"
rate = 20.0

[[fault]]
time = 4.5
op = "move_element"
element = "skiros:objectA"
parent = "skiros:workstationA"

[[fault]]
time = 4.5
op = "set_property"
element = "skiros:gripper1"
property = "skiros:ContainerState"
value = "Empty"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut runner = SimRunner::new(&SimScenario::parse(SCENARIO)?)?;
    let goal = vec![GoalLiteral::relation("skiros:contain", "skiros:locationB", "skiros:objectA")];
    let info = runner.run_mission(goal, 2000)?;
    for s in &info.steps {
        println!("{}. {} {:?}", s.index + 1, s.summary, s.state);
    }
    println!("{:?} after {} replans ({})", info.state, info.replans, info.reason.as_deref().unwrap_or("no reason"));
    Ok(())
}
