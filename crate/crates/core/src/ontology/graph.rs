use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{vocab, Iri, RdfTerm, Triple};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown prefix `{0}`")]
    UnknownPrefix(String),
    #[error("prefix `{name}` already bound to <{existing}>, cannot rebind to <{new}>")]
    PrefixConflict {
        name: String,
        existing: String,
        new: String,
    },
    #[error("rdfs:subClassOf cycle {}", .cycle.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" -> "))]
    SubclassCycle { member: Iri, cycle: Vec<Iri> },
}

/// Position of a wildcard in a [`TriplePattern`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Subject,
    Predicate,
    Object,
}

/// A triple with optional wildcards; `None` matches anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: Option<Iri>,
    pub predicate: Option<Iri>,
    pub object: Option<RdfTerm>,
}

impl TriplePattern {
    pub fn new(subject: Option<Iri>, predicate: Option<Iri>, object: Option<RdfTerm>) -> Self {
        TriplePattern {
            subject,
            predicate,
            object,
        }
    }

    pub fn matches(&self, t: &Triple) -> bool {
        self.subject.as_ref().is_none_or(|s| *s == t.subject)
            && self.predicate.as_ref().is_none_or(|p| *p == t.predicate)
            && self.object.as_ref().is_none_or(|o| *o == t.object)
    }
}

pub type Binding = BTreeMap<Position, RdfTerm>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum ObjectKey {
    Iri(String),
    Literal(RdfTerm),
}

/// Set of triples plus a prefix table and a cached subclass closure.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    prefixes: BTreeMap<String, String>,
    triples: BTreeSet<Triple>,
    by_subject: BTreeMap<Iri, BTreeSet<(Iri, RdfTerm)>>,
    by_predicate: BTreeMap<Iri, BTreeSet<(Iri, RdfTerm)>>,
    by_object: BTreeMap<Iri, BTreeSet<(Iri, Iri)>>,
    // strict superclasses of every class that appears in a subClassOf triple
    ancestors: BTreeMap<Iri, BTreeSet<Iri>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.prefixes == other.prefixes && self.triples == other.triples
    }
}

impl Eq for Graph {}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Graph with the standard prefix table preloaded.
    pub fn with_standard_prefixes() -> Self {
        let mut g = Graph::new();
        for (name, base) in vocab::standard_prefixes() {
            g.prefixes.insert(name.to_string(), base.to_string());
        }
        g
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn add_prefix(&mut self, name: &str, base: &str) -> Result<(), GraphError> {
        match self.prefixes.get(name) {
            Some(existing) if existing != base => Err(GraphError::PrefixConflict {
                name: name.to_string(),
                existing: existing.clone(),
                new: base.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                self.prefixes.insert(name.to_string(), base.to_string());
                Ok(())
            }
        }
    }

    pub fn absolute(&self, iri: &Iri) -> Option<String> {
        self.prefixes
            .get(iri.prefix())
            .map(|base| format!("{base}{}", iri.local()))
    }

    /// Finds the prefixed form of an absolute IRI using the prefix table.
    pub fn compact(&self, absolute: &str) -> Option<Iri> {
        self.prefixes
            .iter()
            .filter(|(_, base)| absolute.starts_with(base.as_str()))
            .max_by_key(|(_, base)| base.len())
            .and_then(|(name, base)| Iri::new(name.clone(), &absolute[base.len()..]).ok())
    }

    fn check_prefix(&self, iri: &Iri) -> Result<(), GraphError> {
        if self.prefixes.contains_key(iri.prefix()) {
            Ok(())
        } else {
            Err(GraphError::UnknownPrefix(iri.prefix().to_string()))
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn has(&self, subject: &Iri, predicate: &Iri, object: &RdfTerm) -> bool {
        self.by_subject
            .get(subject)
            .is_some_and(|po| po.contains(&(predicate.clone(), object.clone())))
    }

    /// Inserts a triple. Returns `false` if it was already present.
    ///
    /// A `rdfs:subClassOf` edge that would close a cycle is rejected and the
    /// graph is left unchanged.
    pub fn insert(&mut self, t: Triple) -> Result<bool, GraphError> {
        self.check_prefix(&t.subject)?;
        self.check_prefix(&t.predicate)?;
        if let RdfTerm::Iri(o) = &t.object {
            self.check_prefix(o)?;
        }
        if self.triples.contains(&t) {
            return Ok(false);
        }
        let subclass_edge = t.predicate == vocab::rdfs_subclass_of();
        if subclass_edge {
            if let RdfTerm::Iri(sup) = &t.object {
                if *sup != t.subject && self.is_subclass_of(sup, &t.subject) {
                    let mut cycle = vec![t.subject.clone()];
                    cycle.extend(self.subclass_path(sup, &t.subject));
                    return Err(GraphError::SubclassCycle {
                        member: t.subject.clone(),
                        cycle,
                    });
                }
            }
        }
        self.index(&t);
        if subclass_edge {
            if let RdfTerm::Iri(sup) = &t.object {
                self.extend_closure(&t.subject, sup);
            }
        }
        self.triples.insert(t);
        Ok(true)
    }

    pub fn remove(&mut self, t: &Triple) -> bool {
        if !self.triples.remove(t) {
            return false;
        }
        let po = (t.predicate.clone(), t.object.clone());
        if let Some(set) = self.by_subject.get_mut(&t.subject) {
            set.remove(&po);
            if set.is_empty() {
                self.by_subject.remove(&t.subject);
            }
        }
        let so = (t.subject.clone(), t.object.clone());
        if let Some(set) = self.by_predicate.get_mut(&t.predicate) {
            set.remove(&so);
            if set.is_empty() {
                self.by_predicate.remove(&t.predicate);
            }
        }
        if let RdfTerm::Iri(o) = &t.object {
            if let Some(set) = self.by_object.get_mut(o) {
                set.remove(&(t.predicate.clone(), t.subject.clone()));
                if set.is_empty() {
                    self.by_object.remove(o);
                }
            }
        }
        if t.predicate == vocab::rdfs_subclass_of() {
            self.rebuild_closure();
        }
        true
    }

    /// Adds every prefix and triple of `other`.
    pub fn merge(&mut self, other: &Graph) -> Result<(), GraphError> {
        for (name, base) in &other.prefixes {
            self.add_prefix(name, base)?;
        }
        for t in &other.triples {
            self.insert(t.clone())?;
        }
        Ok(())
    }

    fn index(&mut self, t: &Triple) {
        self.by_subject
            .entry(t.subject.clone())
            .or_default()
            .insert((t.predicate.clone(), t.object.clone()));
        self.by_predicate
            .entry(t.predicate.clone())
            .or_default()
            .insert((t.subject.clone(), t.object.clone()));
        if let RdfTerm::Iri(o) = &t.object {
            self.by_object
                .entry(o.clone())
                .or_default()
                .insert((t.predicate.clone(), t.subject.clone()));
        }
    }

    fn extend_closure(&mut self, sub: &Iri, sup: &Iri) {
        if sub == sup {
            return;
        }
        let mut added: BTreeSet<Iri> = self.ancestors.get(sup).cloned().unwrap_or_default();
        added.insert(sup.clone());
        self.ancestors.entry(sup.clone()).or_default();
        let descendants: Vec<Iri> = self
            .ancestors
            .iter()
            .filter(|(_, anc)| anc.contains(sub))
            .map(|(c, _)| c.clone())
            .chain(std::iter::once(sub.clone()))
            .collect();
        for d in descendants {
            self.ancestors.entry(d).or_default().extend(added.iter().cloned());
        }
    }

    fn rebuild_closure(&mut self) {
        self.ancestors.clear();
        let edges: Vec<(Iri, Iri)> = self
            .by_predicate
            .get(&vocab::rdfs_subclass_of())
            .map(|set| {
                set.iter()
                    .filter_map(|(s, o)| o.as_iri().map(|o| (s.clone(), o.clone())))
                    .collect()
            })
            .unwrap_or_default();
        for (s, o) in edges {
            self.extend_closure(&s, &o);
        }
    }

    /// Iterates triples in storage order (not canonical).
    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    fn object_key(&self, o: &RdfTerm) -> ObjectKey {
        match o {
            RdfTerm::Iri(iri) => ObjectKey::Iri(self.absolute(iri).unwrap_or_else(|| iri.to_string())),
            lit => ObjectKey::Literal(lit.clone()),
        }
    }

    fn abs_or_display(&self, iri: &Iri) -> String {
        self.absolute(iri).unwrap_or_else(|| iri.to_string())
    }

    /// Triples sorted by (absolute subject, absolute predicate, object).
    pub fn canonical_triples(&self) -> Vec<&Triple> {
        let mut v: Vec<&Triple> = self.triples.iter().collect();
        self.sort_canonical(&mut v);
        v
    }

    fn sort_canonical(&self, v: &mut [&Triple]) {
        v.sort_by_cached_key(|t| {
            (
                self.abs_or_display(&t.subject),
                self.abs_or_display(&t.predicate),
                self.object_key(&t.object),
            )
        });
    }

    /// Sorts IRIs by their absolute form.
    pub fn sort_iris(&self, v: &mut Vec<Iri>) {
        v.sort_by_cached_key(|i| self.abs_or_display(i));
        v.dedup();
    }

    /// All matching triples in canonical order.
    pub fn matching(&self, pattern: &TriplePattern) -> Vec<&Triple> {
        let mut out: Vec<&Triple> = Vec::new();
        match (&pattern.subject, &pattern.object) {
            (Some(s), _) => {
                if let Some(po) = self.by_subject.get(s) {
                    for (p, o) in po {
                        if pattern.predicate.as_ref().is_none_or(|pp| pp == p)
                            && pattern.object.as_ref().is_none_or(|oo| oo == o)
                        {
                            out.push(self.triples.get(&Triple::new(s.clone(), p.clone(), o.clone())).expect("index in sync"));
                        }
                    }
                }
            }
            (None, Some(RdfTerm::Iri(o))) => {
                if let Some(ps) = self.by_object.get(o) {
                    for (p, s) in ps {
                        if pattern.predicate.as_ref().is_none_or(|pp| pp == p) {
                            out.push(self.triples.get(&Triple::new(s.clone(), p.clone(), o.clone())).expect("index in sync"));
                        }
                    }
                }
            }
            _ => match &pattern.predicate {
                Some(p) => {
                    if let Some(so) = self.by_predicate.get(p) {
                        for (s, o) in so {
                            if pattern.object.as_ref().is_none_or(|oo| oo == o) {
                                out.push(self.triples.get(&Triple::new(s.clone(), p.clone(), o.clone())).expect("index in sync"));
                            }
                        }
                    }
                }
                None => out.extend(self.triples.iter().filter(|t| pattern.matches(t))),
            },
        }
        self.sort_canonical(&mut out);
        out
    }

    /// Returns each matching triple as a map from wildcard position to term.
    pub fn query(&self, pattern: &TriplePattern) -> Vec<Binding> {
        self.matching(pattern)
            .into_iter()
            .map(|t| {
                let mut b = Binding::new();
                if pattern.subject.is_none() {
                    b.insert(Position::Subject, RdfTerm::Iri(t.subject.clone()));
                }
                if pattern.predicate.is_none() {
                    b.insert(Position::Predicate, RdfTerm::Iri(t.predicate.clone()));
                }
                if pattern.object.is_none() {
                    b.insert(Position::Object, t.object.clone());
                }
                b
            })
            .collect()
    }

    /// Objects of `(subject, predicate, ?)` in storage order.
    pub fn objects<'a>(&'a self, subject: &Iri, predicate: &Iri) -> impl Iterator<Item = &'a RdfTerm> + 'a {
        let predicate = predicate.clone();
        self.by_subject
            .get(subject)
            .into_iter()
            .flat_map(move |po| {
                let predicate = predicate.clone();
                po.iter().filter(move |(p, _)| *p == predicate).map(|(_, o)| o)
            })
    }

    /// Subjects of `(?, predicate, object)` for an IRI object.
    pub fn subjects<'a>(&'a self, predicate: &Iri, object: &Iri) -> impl Iterator<Item = &'a Iri> + 'a {
        let predicate = predicate.clone();
        self.by_object
            .get(object)
            .into_iter()
            .flat_map(move |ps| {
                let predicate = predicate.clone();
                ps.iter().filter(move |(p, _)| *p == predicate).map(|(_, s)| s)
            })
    }

    /// All `(predicate, object)` pairs with the given subject.
    pub fn outgoing(&self, subject: &Iri) -> impl Iterator<Item = &(Iri, RdfTerm)> {
        self.by_subject.get(subject).into_iter().flatten()
    }

    /// All `(predicate, subject)` pairs pointing at the given IRI.
    pub fn incoming(&self, object: &Iri) -> impl Iterator<Item = &(Iri, Iri)> {
        self.by_object.get(object).into_iter().flatten()
    }

    /// All `(subject, object)` pairs with the given predicate.
    pub fn with_predicate(&self, predicate: &Iri) -> impl Iterator<Item = &(Iri, RdfTerm)> {
        self.by_predicate.get(predicate).into_iter().flatten()
    }

    pub fn mentions(&self, iri: &Iri) -> bool {
        self.by_subject.contains_key(iri) || self.by_object.contains_key(iri)
    }

    /// Reflexive, transitive `rdfs:subClassOf`.
    pub fn is_subclass_of(&self, sub: &Iri, sup: &Iri) -> bool {
        sub == sup || self.ancestors.get(sub).is_some_and(|a| a.contains(sup))
    }

    /// Strict superclasses of `class`.
    pub fn superclasses(&self, class: &Iri) -> impl Iterator<Item = &Iri> {
        self.ancestors.get(class).into_iter().flatten()
    }

    /// Shortest chain of direct superclass edges from `sub` up to `sup`,
    /// both ends included.
    fn subclass_path(&self, sub: &Iri, sup: &Iri) -> Vec<Iri> {
        let mut prev: BTreeMap<&Iri, &Iri> = BTreeMap::new();
        let mut queue = std::collections::VecDeque::from([sub]);
        let mut seen = BTreeSet::from([sub]);
        while let Some(c) = queue.pop_front() {
            if c == sup {
                let mut path = vec![c.clone()];
                let mut at = c;
                while let Some(p) = prev.get(at) {
                    path.push((*p).clone());
                    at = p;
                }
                path.reverse();
                return path;
            }
            for s in self.direct_superclasses(c) {
                if seen.insert(s) {
                    prev.insert(s, c);
                    queue.push_back(s);
                }
            }
        }
        vec![sub.clone(), sup.clone()]
    }

    /// Direct superclasses of `class`.
    pub fn direct_superclasses<'a>(&'a self, class: &Iri) -> impl Iterator<Item = &'a Iri> + 'a {
        let sco = vocab::rdfs_subclass_of();
        let supers: Vec<&Iri> = self.by_subject.get(class)
            .into_iter()
            .flatten()
            .filter(|(p, _)| *p == sco)
            .filter_map(|(_, o)| o.as_iri())
            .collect();
        supers.into_iter()
    }

    /// True if the IRI is declared as a class or takes part in the subclass
    /// hierarchy.
    pub fn is_concept(&self, iri: &Iri) -> bool {
        if self.ancestors.contains_key(iri) {
            return true;
        }
        let ty = vocab::rdf_type();
        [vocab::owl_class(), vocab::rdfs_class()]
            .iter()
            .any(|c| self.has(iri, &ty, &RdfTerm::Iri(c.clone())))
    }

    /// Every known concept, sorted by absolute IRI.
    pub fn concepts(&self) -> Vec<Iri> {
        let ty = vocab::rdf_type();
        let classes = [RdfTerm::Iri(vocab::owl_class()), RdfTerm::Iri(vocab::rdfs_class())];
        let mut v: Vec<Iri> = self.ancestors.keys().cloned().collect();
        v.extend(
            self.with_predicate(&ty)
                .filter(|(_, o)| classes.contains(o))
                .map(|(s, _)| s.clone()),
        );
        self.sort_iris(&mut v);
        v
    }

    /// Subjects typed with `concept` or any of its subclasses.
    pub fn instances_of(&self, concept: &Iri) -> Vec<Iri> {
        let ty = vocab::rdf_type();
        let mut v: Vec<Iri> = self
            .with_predicate(&ty)
            .filter(|(_, o)| o.as_iri().is_some_and(|c| self.is_subclass_of(c, concept)))
            .map(|(s, _)| s.clone())
            .collect();
        self.sort_iris(&mut v);
        v
    }
}
