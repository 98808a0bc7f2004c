use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Pose;
use crate::ontology::{Iri, RdfTerm};

/// Outgoing IRI-valued relation of an element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub predicate: Iri,
    pub object: Iri,
}

/// Flat record of a world-model entity, as exchanged over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: Iri,
    #[serde(rename = "type")]
    pub kind: Iri,
    pub label: String,
    pub properties: BTreeMap<Iri, Vec<RdfTerm>>,
    pub relations: Vec<Relation>,
    pub pose: Option<Pose>,
    pub parent: Option<Iri>,
}

/// Element description for insertion; the id is assigned by the world model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewElement {
    #[serde(rename = "type")]
    pub kind: Option<Iri>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub properties: BTreeMap<Iri, Vec<RdfTerm>>,
    #[serde(default)]
    pub pose: Option<Pose>,
    /// Spatial parent; the scene root when absent.
    #[serde(default)]
    pub parent: Option<Iri>,
}

impl NewElement {
    pub fn of_type(kind: Iri) -> Self {
        NewElement {
            kind: Some(kind),
            ..Default::default()
        }
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn property(mut self, property: Iri, value: impl Into<RdfTerm>) -> Self {
        self.properties.entry(property).or_default().push(value.into());
        self
    }

    pub fn pose(mut self, pose: Pose) -> Self {
        self.pose = Some(pose);
        self
    }

    pub fn parent(mut self, parent: Iri) -> Self {
        self.parent = Some(parent);
        self
    }
}

/// Partial update of an element. Listed properties replace all previous
/// values of that property; an empty list removes it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElementPatch {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub properties: BTreeMap<Iri, Vec<RdfTerm>>,
    /// `Some(None)` clears the pose, making the element symbolic.
    #[serde(default, with = "double_option", skip_serializing_if = "Option::is_none")]
    pub pose: Option<Option<Pose>>,
}

mod double_option {
    use super::Pose;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Option<Pose>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(inner) => inner.serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<Pose>>, D::Error> {
        Option::<Pose>::deserialize(d).map(Some)
    }
}
