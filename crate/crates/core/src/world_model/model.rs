use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use super::snapshot::pose_of;
use super::{
    ChangeEvent, ChangeKind, ElementPatch, NewElement, Pose, TripleDelta, WmError, WmSnapshot,
};
use crate::ontology::{vocab, Graph, Iri, RdfTerm, Triple};

/// Number of change events kept for replay and late subscribers.
pub const HISTORY_HORIZON: usize = 10_000;

/// Versioned scene store. Single writer; share it through
/// [`WmServer`](super::WmServer).
#[derive(Debug, Clone)]
pub struct WorldModel {
    graph: Arc<Graph>,
    version: u64,
    base: Arc<Graph>,
    base_version: u64,
    history: VecDeque<ChangeEvent>,
    horizon: usize,
}

struct Tx {
    graph: Graph,
    delta: Vec<TripleDelta>,
}

impl Tx {
    fn add(&mut self, t: Triple) -> Result<(), WmError> {
        if self.graph.insert(t.clone())? {
            self.delta.push(TripleDelta::Added(t));
        }
        Ok(())
    }

    fn remove(&mut self, t: &Triple) {
        if self.graph.remove(t) {
            self.delta.push(TripleDelta::Removed(t.clone()));
        }
    }

    fn add_prefix(&mut self, name: &str, base: &str) -> Result<(), WmError> {
        if self.graph.prefixes().get(name).map(String::as_str) != Some(base) {
            self.graph.add_prefix(name, base)?;
            self.delta.push(TripleDelta::Prefix {
                name: name.to_string(),
                base: base.to_string(),
            });
        }
        Ok(())
    }

    fn remove_all(&mut self, subject: &Iri, predicate: &Iri) {
        let doomed: Vec<Triple> = self
            .graph
            .objects(subject, predicate)
            .map(|o| Triple::new(subject.clone(), predicate.clone(), o.clone()))
            .collect();
        for t in &doomed {
            self.remove(t);
        }
    }

    fn set_pose(&mut self, id: &Iri, pose: Option<&Pose>) -> Result<(), WmError> {
        let props = vocab::pose_properties();
        for p in &props {
            self.remove_all(id, p);
        }
        if let Some(pose) = pose {
            let pos = pose.position();
            let ori = pose.orientation();
            for (p, v) in props.iter().zip(pos.iter().chain(ori.iter())) {
                self.add(Triple::new(id.clone(), p.clone(), RdfTerm::Float(*v)))?;
            }
        }
        Ok(())
    }
}

/// Applies recorded events on top of `base`.
pub fn replay<'a>(
    base: &Graph,
    events: impl IntoIterator<Item = &'a ChangeEvent>,
) -> Result<Graph, WmError> {
    let mut g = base.clone();
    for e in events {
        apply_delta(&mut g, &e.delta)?;
    }
    Ok(g)
}

fn apply_delta(g: &mut Graph, delta: &[TripleDelta]) -> Result<(), WmError> {
    for d in delta {
        match d {
            TripleDelta::Added(t) => {
                g.insert(t.clone())?;
            }
            TripleDelta::Removed(t) => {
                g.remove(t);
            }
            TripleDelta::Prefix { name, base } => g.add_prefix(name, base)?,
        }
    }
    Ok(())
}

fn is_reserved(p: &Iri) -> bool {
    *p == vocab::rdf_type()
        || *p == vocab::rdfs_label()
        || *p == vocab::rdfs_subclass_of()
        || vocab::pose_properties().contains(p)
}

fn is_meta_type(concept: &Iri) -> bool {
    matches!(concept.prefix(), "rdf" | "rdfs" | "owl")
}

/// Checks that every typed instance has a known concept, at most one spatial
/// parent, an acyclic parent chain, and well-formed pose literals.
pub(crate) fn validate_scene(g: &Graph) -> Result<(), WmError> {
    let ty = vocab::rdf_type();
    for (s, o) in g.with_predicate(&ty) {
        let Some(c) = o.as_iri() else {
            return Err(WmError::InvalidScene(format!("{s}: rdf:type must be an IRI")));
        };
        if !is_meta_type(c) && !g.is_concept(c) {
            return Err(WmError::InvalidScene(format!("{s}: unknown concept {c}")));
        }
    }
    let contain = vocab::contain();
    let mut parent: BTreeMap<&Iri, &Iri> = BTreeMap::new();
    for (s, o) in g.with_predicate(&contain) {
        let Some(o) = o.as_iri() else {
            return Err(WmError::InvalidScene(format!("{s}: skiros:contain needs an element object")));
        };
        if g.is_concept(s) || g.is_concept(o) {
            continue;
        }
        if *o == vocab::scene_root() {
            return Err(WmError::InvalidScene("the scene root cannot be contained".into()));
        }
        if let Some(prev) = parent.insert(o, s) {
            return Err(WmError::InvalidScene(format!(
                "{o} has two spatial parents ({prev} and {s})"
            )));
        }
    }
    for start in parent.keys() {
        let mut cur = *start;
        let mut steps = 0;
        while let Some(p) = parent.get(cur) {
            if *p == *start || steps > parent.len() {
                return Err(WmError::InvalidScene(format!("containment cycle through {start}")));
            }
            cur = p;
            steps += 1;
        }
    }
    let mut subjects: Vec<&Iri> = g.iter().map(|t| &t.subject).collect();
    subjects.dedup();
    for s in subjects {
        pose_of(g, s)?;
    }
    Ok(())
}

impl WorldModel {
    /// A model over `ontology` holding only the scene root.
    pub fn new(ontology: Graph) -> Result<Self, WmError> {
        Self::with_scene(ontology, &Graph::new())
    }

    /// A model over `ontology` extended with the instances in `scene`, at
    /// version 0.
    pub fn with_scene(ontology: Graph, scene: &Graph) -> Result<Self, WmError> {
        let mut g = ontology;
        g.merge(scene)?;
        let root = vocab::scene_root();
        g.insert(Triple::new(root.clone(), vocab::rdf_type(), vocab::scene()))?;
        if g.objects(&root, &vocab::rdfs_label()).next().is_none() {
            g.insert(Triple::new(root, vocab::rdfs_label(), "scene"))?;
        }
        validate_scene(&g)?;
        let graph = Arc::new(g);
        Ok(WorldModel {
            base: graph.clone(),
            graph,
            version: 0,
            base_version: 0,
            history: VecDeque::new(),
            horizon: HISTORY_HORIZON,
        })
    }

    /// Overrides the retained history length (at least one event).
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon.max(1);
        self
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn snapshot(&self) -> WmSnapshot {
        WmSnapshot {
            version: self.version,
            graph: self.graph.clone(),
        }
    }

    /// Oldest version that can still be rebuilt or subscribed from.
    pub fn oldest_version(&self) -> u64 {
        self.base_version
    }

    pub fn history(&self) -> impl Iterator<Item = &ChangeEvent> {
        self.history.iter()
    }

    /// Events with version greater than `from`.
    pub fn events_since(&self, from: u64) -> Result<Vec<ChangeEvent>, WmError> {
        self.check_version(from)?;
        Ok(self
            .history
            .iter()
            .filter(|e| e.version > from)
            .cloned()
            .collect())
    }

    fn check_version(&self, v: u64) -> Result<(), WmError> {
        if v < self.base_version {
            return Err(WmError::VersionTooOld {
                requested: v,
                oldest: self.base_version,
            });
        }
        if v > self.version {
            return Err(WmError::FutureVersion {
                requested: v,
                current: self.version,
            });
        }
        Ok(())
    }

    /// Rebuilds the graph as it was at `version`.
    pub fn snapshot_at(&self, version: u64) -> Result<WmSnapshot, WmError> {
        self.check_version(version)?;
        if version == self.version {
            return Ok(self.snapshot());
        }
        let g = replay(
            &self.base,
            self.history.iter().take_while(|e| e.version <= version),
        )?;
        Ok(WmSnapshot::new(version, g))
    }

    /// The retained base graph and its version; replaying the history on top
    /// of it yields the current graph.
    pub fn base(&self) -> (u64, &Graph) {
        (self.base_version, &self.base)
    }

    fn commit(
        &mut self,
        kind: ChangeKind,
        subject: Iri,
        predicate: Option<Iri>,
        object: Option<Iri>,
        f: impl FnOnce(&mut Tx) -> Result<(), WmError>,
    ) -> Result<u64, WmError> {
        let mut tx = Tx {
            graph: (*self.graph).clone(),
            delta: Vec::new(),
        };
        f(&mut tx)?;
        self.version += 1;
        self.graph = Arc::new(tx.graph);
        let event = ChangeEvent {
            version: self.version,
            kind,
            subject,
            predicate,
            object,
            delta: tx.delta,
        };
        log::debug!("wm v{} {:?} {}", event.version, event.kind, event.subject);
        self.history.push_back(event);
        while self.history.len() > self.horizon {
            let old = self.history.pop_front().expect("non-empty history");
            apply_delta(Arc::make_mut(&mut self.base), &old.delta)?;
            self.base_version = old.version;
        }
        Ok(self.version)
    }

    fn require(&self, id: &Iri) -> Result<(), WmError> {
        if self.snapshot().exists(id) {
            Ok(())
        } else {
            Err(WmError::UnknownElement(id.clone()))
        }
    }

    fn check_properties(
        &self,
        properties: &BTreeMap<Iri, Vec<RdfTerm>>,
    ) -> Result<(), WmError> {
        for (p, vals) in properties {
            if is_reserved(p) {
                return Err(WmError::ReservedPredicate(p.clone()));
            }
            if let Some(v) = vals.iter().find(|v| !v.is_literal()) {
                return Err(WmError::InvalidLiteral(format!(
                    "{p}: {} is not a literal; use a relation",
                    v.to_turtle()
                )));
            }
        }
        Ok(())
    }

    /// Adds an element with the next free id `<prefix>:<Concept>-<N>`.
    pub fn add_element(&mut self, e: NewElement) -> Result<Iri, WmError> {
        let kind = e
            .kind
            .clone()
            .ok_or_else(|| WmError::InvalidLiteral("element type is required".into()))?;
        if !self.graph.is_concept(&kind) {
            return Err(WmError::UnknownConcept(kind));
        }
        let id = (1u64..)
            .map(|n| Iri::must(&format!("{}:{}-{n}", kind.prefix(), kind.local())))
            .find(|id| !self.graph.mentions(id))
            .expect("unbounded id space");
        self.add_element_with_id(id.clone(), e)?;
        Ok(id)
    }

    /// Adds an element under a caller-chosen id.
    pub fn add_element_with_id(&mut self, id: Iri, e: NewElement) -> Result<u64, WmError> {
        let kind = e
            .kind
            .clone()
            .ok_or_else(|| WmError::InvalidLiteral("element type is required".into()))?;
        if !self.graph.is_concept(&kind) {
            return Err(WmError::UnknownConcept(kind));
        }
        if self.snapshot().exists(&id) {
            return Err(WmError::DuplicateElement(id));
        }
        if let Some(parent) = &e.parent {
            self.require(parent)?;
        }
        self.check_properties(&e.properties)?;
        let label = e.label.clone().unwrap_or_else(|| id.local().to_string());
        self.commit(ChangeKind::ElementAdded, id.clone(), None, None, |tx| {
            tx.add(Triple::new(id.clone(), vocab::rdf_type(), kind))?;
            tx.add(Triple::new(id.clone(), vocab::rdfs_label(), label.as_str()))?;
            for (p, vals) in &e.properties {
                for v in vals {
                    tx.add(Triple::new(id.clone(), p.clone(), v.clone()))?;
                }
            }
            tx.set_pose(&id, e.pose.as_ref())?;
            if let Some(parent) = e.parent {
                tx.add(Triple::new(parent, vocab::contain(), id.clone()))?;
            }
            Ok(())
        })
    }

    pub fn update_element(&mut self, id: &Iri, patch: ElementPatch) -> Result<u64, WmError> {
        self.require(id)?;
        self.check_properties(&patch.properties)?;
        self.commit(ChangeKind::ElementUpdated, id.clone(), None, None, |tx| {
            if let Some(label) = &patch.label {
                tx.remove_all(id, &vocab::rdfs_label());
                tx.add(Triple::new(id.clone(), vocab::rdfs_label(), label.as_str()))?;
            }
            for (p, vals) in &patch.properties {
                tx.remove_all(id, p);
                for v in vals {
                    tx.add(Triple::new(id.clone(), p.clone(), v.clone()))?;
                }
            }
            if let Some(pose) = &patch.pose {
                tx.set_pose(id, pose.as_ref())?;
            }
            Ok(())
        })
    }

    /// Replaces every value of `property` on `id`.
    pub fn set_property(
        &mut self,
        id: &Iri,
        property: &Iri,
        values: Vec<RdfTerm>,
    ) -> Result<u64, WmError> {
        let mut properties = BTreeMap::new();
        properties.insert(property.clone(), values);
        self.require(id)?;
        self.check_properties(&properties)?;
        self.commit(
            ChangeKind::ElementUpdated,
            id.clone(),
            Some(property.clone()),
            None,
            |tx| {
                tx.remove_all(id, property);
                for v in &properties[property] {
                    tx.add(Triple::new(id.clone(), property.clone(), v.clone()))?;
                }
                Ok(())
            },
        )
    }

    /// Removes an element together with every relation pointing at it.
    pub fn remove_element(&mut self, id: &Iri) -> Result<u64, WmError> {
        if *id == vocab::scene_root() {
            return Err(WmError::RootImmutable);
        }
        self.require(id)?;
        let snap = self.snapshot();
        if !snap.children(id).is_empty() {
            return Err(WmError::ElementHasChildren(id.clone()));
        }
        let g = snap.graph();
        let mut doomed: Vec<Triple> = g
            .outgoing(id)
            .map(|(p, o)| Triple::new(id.clone(), p.clone(), o.clone()))
            .collect();
        doomed.extend(
            g.incoming(id)
                .map(|(s, p)| Triple::new(s.clone(), p.clone(), id.clone())),
        );
        doomed.sort();
        self.commit(ChangeKind::ElementRemoved, id.clone(), None, None, |tx| {
            for t in &doomed {
                tx.remove(t);
            }
            Ok(())
        })
    }

    /// Asserts or retracts a relation between two elements. `skiros:contain`
    /// is exclusive on its object and `skiros:at` on its subject.
    pub fn set_relation(
        &mut self,
        subject: &Iri,
        predicate: &Iri,
        object: &Iri,
        state: bool,
    ) -> Result<u64, WmError> {
        if is_reserved(predicate) {
            return Err(WmError::ReservedPredicate(predicate.clone()));
        }
        self.require(subject)?;
        self.require(object)?;
        let snap = self.snapshot();
        let contain = vocab::contain();
        let at = vocab::at();
        if state && *predicate == contain {
            if *object == vocab::scene_root() {
                return Err(WmError::RootImmutable);
            }
            if subject == object || snap.ancestors(subject).contains(object) {
                return Err(WmError::CycleDetected {
                    element: object.clone(),
                    parent: subject.clone(),
                });
            }
        }
        let kind = if state {
            ChangeKind::RelationSet
        } else {
            ChangeKind::RelationCleared
        };
        self.commit(
            kind,
            subject.clone(),
            Some(predicate.clone()),
            Some(object.clone()),
            |tx| {
                let t = Triple::new(subject.clone(), predicate.clone(), object.clone());
                if !state {
                    tx.remove(&t);
                    return Ok(());
                }
                if *predicate == contain {
                    let others: Vec<Triple> = tx
                        .graph
                        .subjects(&contain, object)
                        .filter(|s| *s != subject)
                        .map(|s| Triple::new(s.clone(), contain.clone(), object.clone()))
                        .collect();
                    for o in &others {
                        tx.remove(o);
                    }
                } else if *predicate == at {
                    let others: Vec<Triple> = tx
                        .graph
                        .objects(subject, &at)
                        .filter(|o| o.as_iri() != Some(object))
                        .map(|o| Triple::new(subject.clone(), at.clone(), o.clone()))
                        .collect();
                    for o in &others {
                        tx.remove(o);
                    }
                }
                tx.add(t)
            },
        )
    }

    /// Re-parents `id` under `new_parent`, recomputing a posed element's
    /// relative pose so that its world pose is unchanged.
    pub fn move_element(&mut self, id: &Iri, new_parent: &Iri) -> Result<u64, WmError> {
        if *id == vocab::scene_root() {
            return Err(WmError::RootImmutable);
        }
        self.require(id)?;
        self.require(new_parent)?;
        let snap = self.snapshot();
        if id == new_parent || snap.ancestors(new_parent).contains(id) {
            return Err(WmError::CycleDetected {
                element: id.clone(),
                parent: new_parent.clone(),
            });
        }
        let old_parent = snap.parent(id);
        let unchanged = old_parent.as_ref() == Some(new_parent);
        let new_pose = match snap.pose(id)? {
            Some(_) if !unchanged => {
                let world = snap.world_pose(id)?;
                Some(snap.world_pose(new_parent)?.inverse().compose(&world))
            }
            _ => None,
        };
        let contain = vocab::contain();
        self.commit(
            ChangeKind::RelationSet,
            new_parent.clone(),
            Some(contain.clone()),
            Some(id.clone()),
            |tx| {
                if unchanged {
                    return Ok(());
                }
                if let Some(old) = old_parent {
                    tx.remove(&Triple::new(old, contain.clone(), id.clone()));
                }
                tx.add(Triple::new(new_parent.clone(), contain.clone(), id.clone()))?;
                if let Some(p) = new_pose {
                    tx.set_pose(id, Some(&p))?;
                }
                Ok(())
            },
        )
    }

    pub fn world_pose(&self, id: &Iri) -> Result<Pose, WmError> {
        self.snapshot().world_pose(id)
    }

    /// Replaces every scene instance with those in `scene` as one commit.
    /// Ontology statements (about concepts and properties) are kept.
    pub fn load_scene(&mut self, scene: &Graph) -> Result<u64, WmError> {
        let snap = self.snapshot();
        let root = vocab::scene_root();
        let mut next = (*self.graph).clone();
        for id in snap.element_ids() {
            if id == root {
                continue;
            }
            let doomed: Vec<Triple> = next
                .iter()
                .filter(|t| t.subject == id || t.object.as_iri() == Some(&id))
                .cloned()
                .collect();
            for t in &doomed {
                next.remove(t);
            }
        }
        next.merge(scene)?;
        validate_scene(&next)?;
        let before: Vec<Triple> = self.graph.iter().cloned().collect();
        self.commit(ChangeKind::SceneLoaded, root, None, None, |tx| {
            for (name, base) in next.prefixes() {
                tx.add_prefix(name, base)?;
            }
            for t in before.iter().filter(|t| !next.contains(t)) {
                tx.remove(t);
            }
            let mut added: Vec<&Triple> = next.iter().filter(|t| !tx.graph.contains(t)).collect();
            added.sort_by_key(|t| t.predicate != vocab::rdfs_subclass_of());
            for t in added {
                tx.add(t.clone())?;
            }
            Ok(())
        })
    }
}
