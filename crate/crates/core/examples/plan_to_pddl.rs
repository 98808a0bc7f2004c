//! Derives a planning domain from the skill library, grounds it against a
//! scene and prints the PDDL pair and the shortest plan.

use rskill::ontology::{base_ontology, parse_turtle};
use rskill::planning::{emit_domain, emit_problem, generate_domain, generate_problem, parse_goal, plan};
use rskill::sim;
use rskill::skill::Registry;
use rskill::skill_manager::builtin;
use rskill::world_model::WorldModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let goal_text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "skiros:contain skiros:locationB skiros:objectA".into());
    let scene = parse_turtle(sim::SCENE_TWO_WS)?;
    let snap = WorldModel::with_scene(base_ontology(), &scene)?.snapshot();
    let registry = Registry::build(&[builtin::library(), sim::library()], snap.graph())?;
    let pd = generate_domain(&registry, &snap);
    let problem = generate_problem(&pd, &snap, &parse_goal(&goal_text)?)?;
    println!("{}", emit_domain(&pd.domain)?);
    println!("{}", emit_problem(&problem)?);
    let p = plan(&pd.domain, &problem)?;
    for (i, step) in p.steps.iter().enumerate() {
        println!("; {}. {step}", i + 1);
    }
    Ok(())
}
