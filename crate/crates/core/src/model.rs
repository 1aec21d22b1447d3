//! Domain types shared by every stage of the pipeline.
//!
//! Atoms are keyed by canonical strings: a sentence id, a surface form and a
//! type label. Two atoms are equal iff all of their fields are equal, and the
//! prediction/gold containers have set semantics, so repeated mentions of the
//! same `(sentence, surface, type)` collapse into one atom.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CanonicalizationEmpty;

/// How surface strings are case-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CasePolicy {
    #[default]
    Fold,
    Preserve,
}

/// Canonicalizes surface strings and labels.
#[derive(Debug, Clone, Copy, Default)]
pub struct Canonicalizer {
    pub case: CasePolicy,
}

impl Canonicalizer {
    pub fn new(case: CasePolicy) -> Self {
        Self { case }
    }

    /// Trims, collapses internal whitespace runs to one space and, under
    /// [`CasePolicy::Fold`], lowercases.
    pub fn surface(&self, raw: &str) -> Result<String, CanonicalizationEmpty> {
        let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            return Err(CanonicalizationEmpty);
        }
        Ok(match self.case {
            CasePolicy::Fold => collapsed.to_lowercase(),
            CasePolicy::Preserve => collapsed,
        })
    }
}

/// Surface canonicalization under the default (case-folding) policy.
pub fn canonicalize_surface(raw: &str) -> Result<String, CanonicalizationEmpty> {
    Canonicalizer::default().surface(raw)
}

/// Labels are always lowercased with all whitespace removed, so that
/// `"Live_In"` and `"live_in"` name the same type.
pub fn canonicalize_label(raw: &str) -> Result<String, CanonicalizationEmpty> {
    let label: String = raw
        .chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    if label.is_empty() {
        Err(CanonicalizationEmpty)
    } else {
        Ok(label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
}

/// `ent(S, E, T)`: surface `E` is an entity of type `T` in sentence `S`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityAtom {
    pub sentence_id: String,
    pub surface: String,
    pub etype: String,
}

impl EntityAtom {
    pub fn new(sentence_id: impl Into<String>, surface: impl Into<String>, etype: impl Into<String>) -> Self {
        Self {
            sentence_id: sentence_id.into(),
            surface: surface.into(),
            etype: etype.into(),
        }
    }
}

/// `rel(S, E, F, R)`: a relation of type `R` from subject `E` to object `F`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationAtom {
    pub sentence_id: String,
    pub subject: String,
    pub object: String,
    pub rtype: String,
}

impl RelationAtom {
    pub fn new(
        sentence_id: impl Into<String>,
        subject: impl Into<String>,
        object: impl Into<String>,
        rtype: impl Into<String>,
    ) -> Self {
        Self {
            sentence_id: sentence_id.into(),
            subject: subject.into(),
            object: object.into(),
            rtype: rtype.into(),
        }
    }
}

/// `type_def(R, T, V)`: relation type `R` may hold from a `T` subject to a `V` object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TypeSpec {
    pub rtype: String,
    pub subject_etype: String,
    pub object_etype: String,
}

impl TypeSpec {
    pub fn new(rtype: impl Into<String>, subject_etype: impl Into<String>, object_etype: impl Into<String>) -> Self {
        Self {
            rtype: rtype.into(),
            subject_etype: subject_etype.into(),
            object_etype: object_etype.into(),
        }
    }
}

/// The declared entity and relation types of a dataset.
///
/// The two sets may overlap (ADE uses `adverse-effect` for both).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub entity_types: BTreeSet<String>,
    pub relation_types: BTreeSet<String>,
}

#[derive(Deserialize)]
struct SpertTypes {
    entities: BTreeMap<String, serde_json::Value>,
    relations: BTreeMap<String, serde_json::Value>,
}

impl LabelSchema {
    pub fn new<E, R>(entity_types: E, relation_types: R) -> Result<Self, crate::Error>
    where
        E: IntoIterator,
        E::Item: AsRef<str>,
        R: IntoIterator,
        R::Item: AsRef<str>,
    {
        let entity_types = entity_types
            .into_iter()
            .map(|l| canonicalize_label(l.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let relation_types = relation_types
            .into_iter()
            .map(|l| canonicalize_label(l.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        if entity_types.is_empty() || relation_types.is_empty() {
            return Err(crate::Error::Schema("label schema needs at least one entity and one relation type".into()));
        }
        Ok(Self {
            entity_types,
            relation_types,
        })
    }

    /// Reads a SpERT-style `*_types.json` file (`{"entities": {...}, "relations": {...}}`).
    pub fn from_types_json(text: &str) -> Result<Self, crate::Error> {
        let types: SpertTypes =
            serde_json::from_str(text).map_err(|e| crate::Error::Schema(format!("bad types file: {e}")))?;
        Self::new(types.entities.keys(), types.relations.keys())
    }

    pub fn load(path: &Path) -> Result<Self, crate::Error> {
        let text = fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Self::from_types_json(&text)
    }

    pub fn is_entity_type(&self, label: &str) -> bool {
        self.entity_types.contains(label)
    }

    pub fn is_relation_type(&self, label: &str) -> bool {
        self.relation_types.contains(label)
    }
}

/// A set of entity and relation atoms.
///
/// Used both for model output and for ground truth; see [`PredictionSet`] and
/// [`GoldSet`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSet {
    pub entities: BTreeSet<EntityAtom>,
    pub relations: BTreeSet<RelationAtom>,
}

pub type PredictionSet = AtomSet;
pub type GoldSet = AtomSet;

impl AtomSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` when the atom was already present.
    pub fn insert_entity(&mut self, atom: EntityAtom) -> bool {
        self.entities.insert(atom)
    }

    pub fn insert_relation(&mut self, atom: RelationAtom) -> bool {
        self.relations.insert(atom)
    }

    pub fn extend(&mut self, other: AtomSet) {
        self.entities.extend(other.entities);
        self.relations.extend(other.relations);
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }

    /// Sentence ids that carry at least one atom.
    pub fn sentence_ids(&self) -> BTreeSet<&str> {
        self.entities
            .iter()
            .map(|e| e.sentence_id.as_str())
            .chain(self.relations.iter().map(|r| r.sentence_id.as_str()))
            .collect()
    }

    /// The atoms belonging to one sentence.
    pub fn for_sentence(&self, sentence_id: &str) -> AtomSet {
        AtomSet {
            entities: self.entities.iter().filter(|e| e.sentence_id == sentence_id).cloned().collect(),
            relations: self.relations.iter().filter(|r| r.sentence_id == sentence_id).cloned().collect(),
        }
    }

    /// Entity atoms whose type is not declared in `schema`.
    pub fn unknown_entities<'a>(&'a self, schema: &'a LabelSchema) -> impl Iterator<Item = &'a EntityAtom> + 'a {
        self.entities.iter().filter(|e| !schema.is_entity_type(&e.etype))
    }

    /// Relation atoms whose type is not declared in `schema`.
    pub fn unknown_relations<'a>(&'a self, schema: &'a LabelSchema) -> impl Iterator<Item = &'a RelationAtom> + 'a {
        self.relations.iter().filter(|r| !schema.is_relation_type(&r.rtype))
    }
}
