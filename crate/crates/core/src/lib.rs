pub mod bt;
pub mod ontology;
pub mod planning;
pub mod sim;
pub mod skill;
pub mod skill_manager;
pub mod task_manager;
pub mod world_model;
