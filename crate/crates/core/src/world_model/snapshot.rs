use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{Element, Pose, Relation, WmError};
use crate::ontology::{vocab, Graph, Iri, RdfTerm};

/// Immutable view of the world model at one version.
#[derive(Debug, Clone)]
pub struct WmSnapshot {
    pub(crate) version: u64,
    pub(crate) graph: Arc<Graph>,
}

impl PartialEq for WmSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.graph == other.graph
    }
}

pub(crate) fn pose_of(graph: &Graph, id: &Iri) -> Result<Option<Pose>, WmError> {
    let props = vocab::pose_properties();
    let mut vals = [0.0f64; 7];
    let mut present = [false; 7];
    for (i, p) in props.iter().enumerate() {
        if let Some(term) = graph.objects(id, p).next() {
            vals[i] = term
                .as_f64()
                .ok_or_else(|| WmError::InvalidScene(format!("{id}: {p} must be numeric")))?;
            present[i] = true;
        }
    }
    if !present.iter().any(|p| *p) {
        return Ok(None);
    }
    if !present[3..].iter().any(|p| *p) {
        vals[3] = 1.0;
    }
    Pose::new([vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5], vals[6]])
        .map(Some)
        .map_err(|e| WmError::InvalidScene(format!("{id}: {e}")))
}

impl WmSnapshot {
    pub fn new(version: u64, graph: Graph) -> Self {
        WmSnapshot {
            version,
            graph: Arc::new(graph),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Concept of an element: the first `rdf:type` object that is a known
    /// concept.
    pub fn element_type(&self, id: &Iri) -> Option<Iri> {
        let ty = vocab::rdf_type();
        self.graph
            .objects(id, &ty)
            .filter_map(|o| o.as_iri())
            .find(|c| self.graph.is_concept(c))
            .cloned()
    }

    pub fn exists(&self, id: &Iri) -> bool {
        self.element_type(id).is_some()
    }

    pub fn parent(&self, id: &Iri) -> Option<Iri> {
        let contain = vocab::contain();
        self.graph.subjects(&contain, id).next().cloned()
    }

    /// Parent frame: the containing element, or the scene root for
    /// uncontained elements.
    pub fn spatial_parent(&self, id: &Iri) -> Option<Iri> {
        let root = vocab::scene_root();
        if *id == root {
            return None;
        }
        self.parent(id).or(Some(root))
    }

    pub fn children(&self, id: &Iri) -> Vec<Iri> {
        let contain = vocab::contain();
        let mut v: Vec<Iri> = self
            .graph
            .objects(id, &contain)
            .filter_map(|o| o.as_iri())
            .filter(|c| self.exists(c))
            .cloned()
            .collect();
        self.graph.sort_iris(&mut v);
        v
    }

    pub fn label(&self, id: &Iri) -> Option<String> {
        self.graph.objects(id, &vocab::rdfs_label()).find_map(|o| match o {
            RdfTerm::Str(s) => Some(s.clone()),
            _ => None,
        })
    }

    /// Values of a property (literal or IRI) in canonical order.
    pub fn values(&self, id: &Iri, property: &Iri) -> Vec<RdfTerm> {
        let mut v: Vec<RdfTerm> = self.graph.objects(id, property).cloned().collect();
        v.sort();
        v
    }

    pub fn has_relation(&self, subject: &Iri, predicate: &Iri, object: &Iri) -> bool {
        self.graph.has(subject, predicate, &RdfTerm::Iri(object.clone()))
    }

    pub fn pose(&self, id: &Iri) -> Result<Option<Pose>, WmError> {
        pose_of(&self.graph, id)
    }

    pub fn element(&self, id: &Iri) -> Option<Element> {
        let kind = self.element_type(id)?;
        let ty = vocab::rdf_type();
        let label_p = vocab::rdfs_label();
        let pose_props: BTreeSet<Iri> = vocab::pose_properties().into_iter().collect();
        let mut properties: BTreeMap<Iri, Vec<RdfTerm>> = BTreeMap::new();
        let mut relations = Vec::new();
        for (p, o) in self.graph.outgoing(id) {
            if *p == ty || *p == label_p || pose_props.contains(p) {
                continue;
            }
            match o {
                RdfTerm::Iri(obj) => relations.push(Relation {
                    predicate: p.clone(),
                    object: obj.clone(),
                }),
                lit => properties.entry(p.clone()).or_default().push(lit.clone()),
            }
        }
        relations.sort();
        for vals in properties.values_mut() {
            vals.sort();
        }
        Some(Element {
            id: id.clone(),
            kind,
            label: self.label(id).unwrap_or_default(),
            properties,
            relations,
            pose: self.pose(id).ok().flatten(),
            parent: self.spatial_parent(id),
        })
    }

    /// Every element id, sorted by absolute IRI.
    pub fn element_ids(&self) -> Vec<Iri> {
        let ty = vocab::rdf_type();
        let mut v: Vec<Iri> = self
            .graph
            .with_predicate(&ty)
            .filter(|(_, o)| o.as_iri().is_some_and(|c| self.graph.is_concept(c)))
            .map(|(s, _)| s.clone())
            .collect();
        self.graph.sort_iris(&mut v);
        v
    }

    pub fn elements(&self) -> Vec<Element> {
        self.element_ids().iter().filter_map(|id| self.element(id)).collect()
    }

    pub fn instances_of(&self, concept: &Iri) -> Vec<Iri> {
        self.graph
            .instances_of(concept)
            .into_iter()
            .filter(|i| self.exists(i))
            .collect()
    }

    /// Ancestors from the direct parent up to the root.
    pub fn ancestors(&self, id: &Iri) -> Vec<Iri> {
        let mut out = Vec::new();
        let mut cur = self.parent(id);
        while let Some(p) = cur {
            if out.contains(&p) || p == *id {
                break;
            }
            cur = self.parent(&p);
            out.push(p);
        }
        out
    }

    /// Pose of `id` in the scene-root frame, composing relative poses along
    /// the containment chain. Symbolic elements contribute identity.
    pub fn world_pose(&self, id: &Iri) -> Result<Pose, WmError> {
        if !self.exists(id) {
            return Err(WmError::UnknownElement(id.clone()));
        }
        let mut chain = vec![id.clone()];
        chain.extend(self.ancestors(id));
        let mut world = Pose::identity();
        for node in chain.iter().rev() {
            if let Some(p) = self.pose(node)? {
                world = world.compose(&p);
            }
        }
        Ok(world)
    }
}
