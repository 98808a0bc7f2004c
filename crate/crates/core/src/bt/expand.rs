use super::node::{Body, PrimitiveSlot, SkillLeaf};
use super::{BtError, BtNode, Catalog};
use crate::ontology::Iri;
use crate::skill::{
    complete_bindings, Bindings, Blackboard, ImplBody, Implementation, Registry, Scope, SkillDescription,
    TreeSpec, Value, ROBOT_KEY,
};
use crate::world_model::WmSnapshot;

/// Nesting limit for compound skills.
pub const MAX_DEPTH: usize = 32;

/// Values visible to `d` from `scope`, with defaults, and inferred keys
/// filled in when inference succeeds.
fn partial_bindings(d: &SkillDescription, scope: &Scope, bb: &Blackboard, wm: &WmSnapshot) -> Bindings {
    let mut b = Bindings::new();
    for p in &d.params {
        let v = bb.try_get(scope, &p.key).or_else(|| p.default.clone());
        if let Some(v) = v.and_then(|v| v.coerce(&p.ty).ok()) {
            b.insert(p.key.clone(), v);
        }
    }
    if d.param(ROBOT_KEY).is_none() {
        if let Some(v) = bb.try_get(scope, ROBOT_KEY) {
            b.insert(ROBOT_KEY.to_string(), v);
        }
    }
    complete_bindings(d, &b, wm).unwrap_or(b)
}

fn instance_of(wm: &WmSnapshot, element: &Iri, concept: &Iri) -> bool {
    wm.graph()
        .objects(element, &crate::ontology::vocab::rdf_type())
        .filter_map(|t| t.as_iri().cloned())
        .any(|t| wm.graph().is_subclass_of(&t, concept))
}

fn accepts(imp: &Implementation, b: &Bindings, wm: &WmSnapshot) -> bool {
    imp.description.params.iter().all(|p| match (p.concept(), b.get(&p.key)) {
        (Some(c), Some(Value::Element(e))) => instance_of(wm, e, c),
        _ => true,
    })
}

/// `a` is at least as specific as `b` on every element parameter.
fn at_least_as_specific(a: &Implementation, b: &Implementation, wm: &WmSnapshot) -> bool {
    a.description.params.iter().all(|p| {
        match (p.concept(), b.description.param(&p.key).and_then(|q| q.concept())) {
            (Some(ca), Some(cb)) => wm.graph().is_subclass_of(ca, cb),
            _ => true,
        }
    })
}

/// Picks the implementation of `skill` for the given bindings: among those
/// whose parameter concepts accept the bound elements, the most specific;
/// ties go to the smallest name.
pub fn select_implementation<'r>(
    registry: &'r Registry,
    skill: &str,
    bindings: &Bindings,
    wm: &WmSnapshot,
) -> Result<&'r Implementation, BtError> {
    if registry.description(skill).is_none() {
        return Err(BtError::UnknownSkill(skill.to_string()));
    }
    let fits: Vec<&Implementation> = registry
        .implementations_of(skill)
        .filter(|i| accepts(i, bindings, wm))
        .collect();
    let maximal = fits.iter().copied().find(|a| {
        !fits
            .iter()
            .any(|b| at_least_as_specific(b, a, wm) && !at_least_as_specific(a, b, wm))
    });
    maximal.ok_or_else(|| BtError::NoImplementation {
        skill: skill.to_string(),
        reason: if registry.implementations_of(skill).next().is_none() {
            "nothing registered".to_string()
        } else {
            "no implementation accepts the bound parameters".to_string()
        },
    })
}

/// Expands `skill` as seen from `scope` into an executable node.
/// `pinned` forces a specific implementation.
pub fn instantiate_skill(
    registry: &Registry,
    catalog: &Catalog,
    wm: &WmSnapshot,
    bb: &Blackboard,
    scope: &Scope,
    skill: &str,
    pinned: Option<&str>,
) -> Result<BtNode, BtError> {
    expand_skill(registry, catalog, wm, bb, scope, skill, pinned, 0)
}

/// Expands a manifest tree whose skill nodes resolve through `scope`.
pub fn instantiate_tree(
    registry: &Registry,
    catalog: &Catalog,
    wm: &WmSnapshot,
    bb: &Blackboard,
    scope: &Scope,
    tree: &TreeSpec,
) -> Result<BtNode, BtError> {
    expand_tree(registry, catalog, wm, bb, scope, tree, 0)
}

#[allow(clippy::too_many_arguments)]
fn expand_skill(
    registry: &Registry,
    catalog: &Catalog,
    wm: &WmSnapshot,
    bb: &Blackboard,
    scope: &Scope,
    skill: &str,
    pinned: Option<&str>,
    depth: usize,
) -> Result<BtNode, BtError> {
    if depth > MAX_DEPTH {
        return Err(BtError::ExpansionDepth(MAX_DEPTH));
    }
    let base = registry
        .description(skill)
        .ok_or_else(|| BtError::UnknownSkill(skill.to_string()))?;
    let partial = partial_bindings(base, scope, bb, wm);
    let imp = match pinned {
        Some(name) => registry
            .implementation(name)
            .filter(|i| i.implements == skill)
            .ok_or_else(|| BtError::NoImplementation {
                skill: skill.to_string(),
                reason: format!("{name} is not registered"),
            })?,
        None => select_implementation(registry, skill, &partial, wm)?,
    };
    let body = match &imp.body {
        ImplBody::Primitive { factory } => {
            let f = catalog
                .get(factory)
                .ok_or_else(|| BtError::UnknownFactory(factory.clone()))?;
            Body::Primitive(PrimitiveSlot::new(f.clone()))
        }
        ImplBody::Compound { tree } => {
            Body::Tree(Box::new(expand_tree(registry, catalog, wm, bb, scope, tree, depth + 1)?))
        }
    };
    Ok(BtNode::skill(SkillLeaf::new(
        skill.to_string(),
        imp.name.clone(),
        imp.description.clone(),
        scope.clone(),
        partial,
        body,
    )))
}

fn expand_tree(
    registry: &Registry,
    catalog: &Catalog,
    wm: &WmSnapshot,
    bb: &Blackboard,
    scope: &Scope,
    tree: &TreeSpec,
    depth: usize,
) -> Result<BtNode, BtError> {
    if depth > MAX_DEPTH {
        return Err(BtError::ExpansionDepth(MAX_DEPTH));
    }
    match tree {
        TreeSpec::Processor { processor, children } => {
            let kids = children
                .iter()
                .map(|c| expand_tree(registry, catalog, wm, bb, scope, c, depth + 1))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(BtNode::processor(*processor, kids))
        }
        TreeSpec::Skill {
            skill, implementation, ..
        } => expand_skill(
            registry,
            catalog,
            wm,
            bb,
            &scope.child(tree.overlay()),
            skill,
            implementation.as_deref(),
            depth,
        ),
    }
}
