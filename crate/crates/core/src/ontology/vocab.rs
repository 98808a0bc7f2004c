//! Well-known vocabulary shipped in the bundled base ontology.

use super::Iri;

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
pub const SKIROS: &str = "http://rvmi.aau.dk/ontologies/skiros.owl#";
pub const RPARTS: &str = "http://rvmi.aau.dk/ontologies/rparts.owl#";
pub const SCALABLE: &str = "http://rvmi.aau.dk/ontologies/scalable.owl#";

macro_rules! vocab {
    ($($name:ident => $iri:literal),* $(,)?) => {
        $(
            pub fn $name() -> Iri {
                Iri::must($iri)
            }
        )*
    };
}

vocab! {
    rdf_type => "rdf:type",
    rdfs_subclass_of => "rdfs:subClassOf",
    rdfs_label => "rdfs:label",
    rdfs_class => "rdfs:Class",
    owl_class => "owl:Class",
    contain => "skiros:contain",
    at => "skiros:at",
    has_a => "skiros:hasA",
    has_skill => "skiros:hasSkill",
    scene => "skiros:Scene",
    scene_root => "skiros:Scene-0",
    skill => "skiros:Skill",
    robot => "skiros:Robot",
    location => "skiros:Location",
    product => "skiros:Product",
    arm_device => "rparts:ArmDevice",
    gripper_effector => "rparts:GripperEffector",
    container_state => "skiros:ContainerState",
    position_x => "skiros:PositionX",
    position_y => "skiros:PositionY",
    position_z => "skiros:PositionZ",
    orientation_w => "skiros:OrientationW",
    orientation_x => "skiros:OrientationX",
    orientation_y => "skiros:OrientationY",
    orientation_z => "skiros:OrientationZ",
}

/// The seven pose properties in (x, y, z, qw, qx, qy, qz) order.
pub fn pose_properties() -> [Iri; 7] {
    [
        position_x(),
        position_y(),
        position_z(),
        orientation_w(),
        orientation_x(),
        orientation_y(),
        orientation_z(),
    ]
}

/// Prefix table entries every bundled document relies on.
pub fn standard_prefixes() -> [(&'static str, &'static str); 6] {
    [
        ("owl", OWL),
        ("rdf", RDF),
        ("rdfs", RDFS),
        ("rparts", RPARTS),
        ("scalable", SCALABLE),
        ("skiros", SKIROS),
    ]
}
