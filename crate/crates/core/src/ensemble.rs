//! Two-model agreement: an entity survives only if both models predicted it
//! with the same type. Relations come from the primary model; ones that lose
//! an endpoint here are removed later by the consistency checker.

use std::collections::BTreeSet;

use crate::model::{AtomSet, EntityAtom, PredictionSet};

pub fn agree_entities(a: &PredictionSet, b: &PredictionSet) -> BTreeSet<EntityAtom> {
    a.entities.intersection(&b.entities).cloned().collect()
}

pub fn ensemble_predict(primary: &PredictionSet, auditor: &PredictionSet) -> PredictionSet {
    AtomSet {
        entities: agree_entities(primary, auditor),
        relations: primary.relations.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::check;
    use crate::model::RelationAtom;
    use proptest::prelude::*;

    fn ents(items: &[(&str, &str)]) -> PredictionSet {
        let mut p = PredictionSet::new();
        for (s, t) in items {
            p.insert_entity(EntityAtom::new("s1", *s, *t));
        }
        p
    }

    #[test]
    fn intersection() {
        let a = ents(&[("acme", "org"), ("john", "peop")]);
        let b = ents(&[("acme", "org")]);
        assert_eq!(agree_entities(&a, &b), b.entities);
        assert_eq!(agree_entities(&a, &a), a.entities);
        assert!(agree_entities(&a, &ents(&[("acme", "loc")])).is_empty());
    }

    #[test]
    fn lost_endpoint_removes_relation_downstream() {
        let mut primary = ents(&[("acme", "org"), ("john", "peop")]);
        primary.insert_relation(RelationAtom::new("s1", "john", "acme", "work_for"));
        let auditor = ents(&[("acme", "org")]);
        let merged = ensemble_predict(&primary, &auditor);
        assert_eq!(merged.relations.len(), 1);
        let (kept, derived) = check(&merged, &[]);
        assert!(kept.relations.is_empty());
        assert_eq!(derived.false_declarations.len(), 1);
    }

    #[test]
    fn superset_auditor_and_empty() {
        let mut primary = ents(&[("acme", "org")]);
        primary.insert_relation(RelationAtom::new("s1", "acme", "acme", "r"));
        let auditor = ents(&[("acme", "org"), ("x", "loc")]);
        assert_eq!(ensemble_predict(&primary, &auditor), primary);
        let empty = PredictionSet::new();
        assert_eq!(ensemble_predict(&empty, &empty), empty);
    }

    fn arb_set() -> impl Strategy<Value = PredictionSet> {
        let ent = (prop::sample::select(vec!["a", "b", "c"]), prop::sample::select(vec!["peop", "org"]));
        let rel = (prop::sample::select(vec!["a", "b", "c"]), prop::sample::select(vec!["a", "b", "c"]));
        (prop::collection::vec(ent, 0..6), prop::collection::vec(rel, 0..6)).prop_map(|(es, rs)| {
            let mut p = PredictionSet::new();
            for (s, t) in es {
                p.insert_entity(EntityAtom::new("s1", s, t));
            }
            for (e, f) in rs {
                p.insert_relation(RelationAtom::new("s1", e, f, "r"));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn bounds_and_idempotence(a in arb_set(), b in arb_set()) {
            prop_assert_eq!(ensemble_predict(&a, &a), a.clone());
            let merged = ensemble_predict(&a, &b);
            prop_assert!(merged.entities.is_subset(&a.entities));
            prop_assert!(merged.entities.is_subset(&b.entities));
            let (kept, _) = check(&merged, &[]);
            for r in &kept.relations {
                let agreed = |x: &str| merged.entities.iter().any(|e| e.surface == x);
                prop_assert!(agreed(&r.subject) && agreed(&r.object));
            }
        }
    }
}
