//! Consistency checking of predicted relations against predicted entities and
//! optional type specifications.
//!
//! The checker is a three-rule stratified program:
//!
//! ```text
//! false_declaration(S,E,F,R) :- atom(rel(S,E,F,R)),
//!     1{not atom(ent(S,E,_)); not atom(ent(S,F,_))}.
//! has_declaration(R) :- type_def(R,_,_).
//! ok_type(S,E,F,R) :- atom(rel(S,E,F,R)), atom(ent(S,E,T)), atom(ent(S,F,V)),
//!     1{type_def(R,T,V); not has_declaration(R)}.
//! ```
//!
//! Negation only reaches `atom/1` facts and `has_declaration/1`, which is
//! defined from facts alone, so the program has exactly one model. It is
//! computed here by a single indexed pass instead of general answer-set search.
//! A relation is kept iff it is `ok_type` and not `false_declaration`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{AtomSet, PredictionSet, RelationAtom, TypeSpec};

/// The derived atoms `W` of the checker's unique model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedFacts {
    pub false_declarations: BTreeSet<RelationAtom>,
    pub ok_types: BTreeSet<RelationAtom>,
    pub has_declarations: BTreeSet<String>,
}

impl DerivedFacts {
    /// Facts that accept every predicted relation, used when the checker is
    /// switched off.
    pub fn vacuous(pred: &PredictionSet) -> Self {
        Self {
            false_declarations: BTreeSet::new(),
            ok_types: pred.relations.clone(),
            has_declarations: BTreeSet::new(),
        }
    }

    pub fn keeps(&self, rel: &RelationAtom) -> bool {
        !self.false_declarations.contains(rel) && self.ok_types.contains(rel)
    }
}

/// Index of a type specification set: relation type -> licensed (subject, object) pairs.
#[derive(Debug, Clone, Default)]
pub struct TypeIndex {
    by_relation: BTreeMap<String, BTreeSet<(String, String)>>,
}

impl TypeIndex {
    pub fn new<'a>(specs: impl IntoIterator<Item = &'a TypeSpec>) -> Self {
        let mut by_relation: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
        for spec in specs {
            by_relation
                .entry(spec.rtype.clone())
                .or_default()
                .insert((spec.subject_etype.clone(), spec.object_etype.clone()));
        }
        Self { by_relation }
    }

    pub fn has_declaration(&self, rtype: &str) -> bool {
        self.by_relation.contains_key(rtype)
    }

    pub fn licenses(&self, rtype: &str, subject_type: &str, object_type: &str) -> bool {
        self.by_relation
            .get(rtype)
            .is_some_and(|pairs| pairs.contains(&(subject_type.to_string(), object_type.to_string())))
    }
}

/// Computes the derived facts for `pred` under `specs`.
pub fn derive<'a>(pred: &PredictionSet, specs: impl IntoIterator<Item = &'a TypeSpec>) -> DerivedFacts {
    let index = TypeIndex::new(specs);

    // (sentence, surface) -> entity types predicted for it.
    let mut types_of: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
    for e in &pred.entities {
        types_of
            .entry((e.sentence_id.as_str(), e.surface.as_str()))
            .or_default()
            .push(e.etype.as_str());
    }

    let mut derived = DerivedFacts {
        has_declarations: index.by_relation.keys().cloned().collect(),
        ..DerivedFacts::default()
    };
    for rel in &pred.relations {
        let subject_types = types_of.get(&(rel.sentence_id.as_str(), rel.subject.as_str()));
        let object_types = types_of.get(&(rel.sentence_id.as_str(), rel.object.as_str()));
        let (Some(subject_types), Some(object_types)) = (subject_types, object_types) else {
            derived.false_declarations.insert(rel.clone());
            continue;
        };
        let ok = !index.has_declaration(&rel.rtype)
            || subject_types
                .iter()
                .any(|t| object_types.iter().any(|v| index.licenses(&rel.rtype, t, v)));
        if ok {
            derived.ok_types.insert(rel.clone());
        }
    }
    derived
}

/// Removes every relation that is `false_declaration` or lacks `ok_type`.
/// Entities pass through unchanged.
pub fn filter(pred: &PredictionSet, derived: &DerivedFacts) -> PredictionSet {
    AtomSet {
        entities: pred.entities.clone(),
        relations: pred.relations.iter().filter(|r| derived.keeps(r)).cloned().collect(),
    }
}

/// Convenience: derive and filter in one step.
pub fn check<'a>(pred: &PredictionSet, specs: impl IntoIterator<Item = &'a TypeSpec>) -> (PredictionSet, DerivedFacts) {
    let derived = derive(pred, specs);
    (filter(pred, &derived), derived)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntityAtom;
    use proptest::prelude::*;

    fn set(ents: &[(&str, &str, &str)], rels: &[(&str, &str, &str, &str)]) -> PredictionSet {
        let mut p = PredictionSet::new();
        for (s, e, t) in ents {
            p.insert_entity(EntityAtom::new(*s, *e, *t));
        }
        for (s, e, f, r) in rels {
            p.insert_relation(RelationAtom::new(*s, *e, *f, *r));
        }
        p
    }

    #[test]
    fn missing_endpoint_is_false_declaration() {
        let p = set(&[("s1", "anne", "peop")], &[("s1", "anne", "paris", "live_in")]);
        let d = derive(&p, &[]);
        let rel = RelationAtom::new("s1", "anne", "paris", "live_in");
        assert!(d.false_declarations.contains(&rel));
        assert!(!d.ok_types.contains(&rel));
        assert!(filter(&p, &d).relations.is_empty());
    }

    #[test]
    fn type_mismatch_is_neither() {
        let p = set(&[("s1", "a", "peop"), ("s1", "b", "org")], &[("s1", "a", "b", "kill")]);
        let specs = [TypeSpec::new("kill", "peop", "peop")];
        let d = derive(&p, &specs);
        assert!(d.has_declarations.contains("kill"));
        assert!(d.ok_types.is_empty());
        assert!(d.false_declarations.is_empty());
        assert!(filter(&p, &d).relations.is_empty());
    }

    #[test]
    fn undeclared_relation_is_ok() {
        let p = set(
            &[("s1", "aspirin", "drug"), ("s1", "nausea", "adverse-effect")],
            &[("s1", "aspirin", "nausea", "adverse-effect")],
        );
        let d = derive(&p, &[]);
        assert_eq!(d.ok_types.len(), 1);
        assert_eq!(filter(&p, &d).relations.len(), 1);
    }

    #[test]
    fn declared_match_is_ok_and_direction_matters() {
        let p = set(
            &[("s1", "john", "peop"), ("s1", "acme", "org")],
            &[("s1", "john", "acme", "work_for"), ("s1", "acme", "john", "work_for")],
        );
        let specs = [TypeSpec::new("work_for", "peop", "org")];
        let kept = filter(&p, &derive(&p, &specs));
        assert_eq!(kept.relations.len(), 1);
        assert!(kept.relations.contains(&RelationAtom::new("s1", "john", "acme", "work_for")));
    }

    #[test]
    fn any_type_combination_suffices() {
        let p = set(
            &[("s1", "washington", "peop"), ("s1", "washington", "loc"), ("s1", "dc", "loc")],
            &[("s1", "washington", "dc", "located_in")],
        );
        let specs = [TypeSpec::new("located_in", "loc", "loc")];
        assert_eq!(derive(&p, &specs).ok_types.len(), 1);
    }

    #[test]
    fn entities_in_other_sentences_do_not_count() {
        let p = set(&[("s2", "a", "peop"), ("s2", "b", "peop")], &[("s1", "a", "b", "kill")]);
        assert_eq!(derive(&p, &[]).false_declarations.len(), 1);
    }

    #[test]
    fn no_relations_is_identity() {
        let p = set(&[("s1", "a", "peop")], &[]);
        assert_eq!(filter(&p, &derive(&p, &[])), p);
    }

    // Brute-force restatement of the three rules, quantifying over every
    // entity atom instead of using the index.
    fn reference(p: &PredictionSet, specs: &[TypeSpec]) -> DerivedFacts {
        let mut d = DerivedFacts {
            has_declarations: specs.iter().map(|s| s.rtype.clone()).collect(),
            ..DerivedFacts::default()
        };
        for r in &p.relations {
            let has = |x: &str| p.entities.iter().any(|e| e.sentence_id == r.sentence_id && e.surface == x);
            if !has(&r.subject) || !has(&r.object) {
                d.false_declarations.insert(r.clone());
            }
            for e in &p.entities {
                for f in &p.entities {
                    let body = e.sentence_id == r.sentence_id
                        && f.sentence_id == r.sentence_id
                        && e.surface == r.subject
                        && f.surface == r.object;
                    let licensed = specs.contains(&TypeSpec::new(&r.rtype, &e.etype, &f.etype))
                        || !d.has_declarations.contains(&r.rtype);
                    if body && licensed {
                        d.ok_types.insert(r.clone());
                    }
                }
            }
        }
        d
    }

    fn arb_instance() -> impl Strategy<Value = (PredictionSet, Vec<TypeSpec>)> {
        let sid = prop::sample::select(vec!["s0", "s1", "s2"]);
        let surf = prop::sample::select(vec!["a", "b", "c", "d"]);
        let ety = prop::sample::select(vec!["peop", "org", "loc"]);
        let rty = prop::sample::select(vec!["r1", "r2", "r3"]);
        let ents = prop::collection::vec((sid.clone(), surf.clone(), ety.clone()), 0..=10);
        let rels = prop::collection::vec((sid, surf.clone(), surf, rty.clone()), 0..=10);
        let specs = prop::collection::vec((rty, ety.clone(), ety), 0..=5);
        (ents, rels, specs).prop_map(|(ents, rels, specs)| {
            let mut p = PredictionSet::new();
            for (s, e, t) in ents {
                p.insert_entity(EntityAtom::new(s, e, t));
            }
            for (s, e, f, r) in rels {
                p.insert_relation(RelationAtom::new(s, e, f, r));
            }
            let specs = specs.into_iter().map(|(r, t, v)| TypeSpec::new(r, t, v)).collect();
            (p, specs)
        })
    }

    proptest! {
        #[test]
        fn matches_reference((p, specs) in arb_instance()) {
            prop_assert_eq!(derive(&p, &specs), reference(&p, &specs));
        }

        #[test]
        fn disjoint_and_monotone((p, specs) in arb_instance()) {
            let d = derive(&p, &specs);
            prop_assert!(d.false_declarations.is_disjoint(&d.ok_types));
            let f = filter(&p, &d);
            prop_assert!(f.relations.is_subset(&p.relations));
            prop_assert_eq!(&f.entities, &p.entities);
            prop_assert_eq!(filter(&f, &derive(&f, &specs)), f);
        }

        #[test]
        fn empty_specs_only_remove_dangling((p, _specs) in arb_instance()) {
            let f = filter(&p, &derive(&p, &[]));
            for r in &p.relations {
                let has = |x: &str| p.entities.iter().any(|e| e.sentence_id == r.sentence_id && e.surface == x);
                prop_assert_eq!(f.relations.contains(r), has(&r.subject) && has(&r.object));
            }
        }

        #[test]
        fn extra_spec_for_declared_type_never_shrinks((p, specs) in arb_instance(),
                                                        t in prop::sample::select(vec!["peop", "org", "loc"]),
                                                        v in prop::sample::select(vec!["peop", "org", "loc"])) {
            if let Some(first) = specs.first() {
                let before = derive(&p, &specs);
                let mut more = specs.clone();
                more.push(TypeSpec::new(&first.rtype, t, v));
                let after = derive(&p, &more);
                prop_assert!(before.ok_types.is_subset(&after.ok_types));
            }
        }
    }
}
