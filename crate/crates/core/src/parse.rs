//! Turning raw model replies into entity and relation atoms.
//!
//! Replies are asked to be strict JSON, but real output drifts: code fences,
//! chatty preambles, stray newlines, single quotes, trailing commas. A fixed
//! ladder of repairs is tried in order until the text parses as a JSON object,
//! and every repair that changed the text is recorded in the diagnostics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, ParseError};
use crate::model::{canonicalize_label, AtomSet, Canonicalizer, EntityAtom, LabelSchema, RelationAtom};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairTag {
    CodeFenceStrip,
    OuterTextStrip,
    NewlineRemoval,
    SingleQuoteFix,
    TrailingCommaDrop,
}

type Repair = fn(&str) -> String;

const LADDER: [(RepairTag, Repair); 5] = [
    (RepairTag::CodeFenceStrip, strip_code_fence),
    (RepairTag::OuterTextStrip, strip_outer_text),
    (RepairTag::NewlineRemoval, remove_newlines),
    (RepairTag::SingleQuoteFix, fix_single_quotes),
    (RepairTag::TrailingCommaDrop, drop_trailing_commas),
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub sentence_id: String,
    pub repairs_applied: Vec<RepairTag>,
    pub dropped_items: usize,
    pub drop_reasons: Vec<String>,
    pub unknown_type_items: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

impl ParseDiagnostics {
    fn new(sentence_id: &str) -> Self {
        Self {
            sentence_id: sentence_id.to_string(),
            ..Self::default()
        }
    }

    fn drop_item(&mut self, reason: String) {
        self.dropped_items += 1;
        self.drop_reasons.push(reason);
    }
}

fn strip_code_fence(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.to_string();
    };
    let after = &text[open + 3..];
    // Skip an info string such as `json`.
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => body[..close].to_string(),
        None => body.to_string(),
    }
}

fn strip_outer_text(text: &str) -> String {
    match (text.find('{'), text.rfind('}')) {
        (Some(start), Some(end)) if start < end => text[start..=end].to_string(),
        _ => text.to_string(),
    }
}

fn remove_newlines(text: &str) -> String {
    text.replace("\r\n", " ").replace(['\n', '\r'], " ")
}

/// Rewrites single-quoted strings as double-quoted ones, leaving the contents
/// of existing double-quoted strings alone.
fn fix_single_quotes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut in_double = false;
    let mut in_single = false;
    while let Some(c) = chars.next() {
        if in_double {
            out.push(c);
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else if c == '"' {
                in_double = false;
            }
        } else if in_single {
            match c {
                '\\' => match chars.next() {
                    Some('\'') => out.push('\''),
                    Some(n) => {
                        out.push('\\');
                        out.push(n);
                    }
                    None => out.push('\\'),
                },
                '\'' => {
                    out.push('"');
                    in_single = false;
                }
                '"' => out.push_str("\\\""),
                _ => out.push(c),
            }
        } else {
            match c {
                '"' => {
                    in_double = true;
                    out.push(c);
                }
                '\'' => {
                    in_single = true;
                    out.push('"');
                }
                _ => out.push(c),
            }
        }
    }
    out
}

fn drop_trailing_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_string {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 1;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
            out.push(c);
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if !matches!(next, Some('}') | Some(']')) {
                out.push(c);
            }
        } else {
            out.push(c);
        }
        i += 1;
    }
    out
}

fn try_object(text: &str) -> Option<Map<String, Value>> {
    match serde_json::from_str::<Value>(text.trim()) {
        Ok(Value::Object(map)) => Some(map),
        _ => None,
    }
}

/// Applies the repair ladder and returns the first JSON object that parses.
pub fn recover_object(raw: &str) -> Result<(Map<String, Value>, Vec<RepairTag>), ParseError> {
    if let Some(map) = try_object(raw) {
        return Ok((map, Vec::new()));
    }
    let mut text = raw.to_string();
    let mut applied = Vec::new();
    for (tag, repair) in LADDER {
        let next = repair(&text);
        if next == text {
            continue;
        }
        applied.push(tag);
        text = next;
        if let Some(map) = try_object(&text) {
            return Ok((map, applied));
        }
    }
    let preview: String = raw.chars().take(80).collect();
    Err(ParseError(preview))
}

/// Values of every key that equals `name` ignoring ASCII case.
fn get_ci<'a>(map: &'a Map<String, Value>, name: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
    map.iter().filter(move |(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v)
}

fn string_field(item: &Map<String, Value>, key: &str) -> Option<String> {
    get_ci(item, key).find_map(|v| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

/// Parses one reply into atoms for `sentence_id`.
pub fn parse_prediction(
    raw: &str,
    sentence_id: &str,
    schema: &LabelSchema,
    canon: Canonicalizer,
) -> Result<(AtomSet, ParseDiagnostics), ParseError> {
    let (object, repairs) = recover_object(raw)?;
    let mut diag = ParseDiagnostics::new(sentence_id);
    diag.repairs_applied = repairs;
    let mut atoms = AtomSet::new();

    for list in get_ci(&object, "entities") {
        let Some(items) = list.as_array() else {
            diag.drop_item("entities value is not an array".into());
            continue;
        };
        for (i, item) in items.iter().enumerate() {
            let Some(item) = item.as_object() else {
                diag.drop_item(format!("entity {i} is not an object"));
                continue;
            };
            let (Some(surface), Some(etype)) = (string_field(item, "entity"), string_field(item, "type")) else {
                diag.drop_item(format!("entity {i} lacks entity/type"));
                continue;
            };
            let (Ok(surface), Ok(etype)) = (canon.surface(&surface), canonicalize_label(&etype)) else {
                diag.drop_item(format!("entity {i} has an empty field"));
                continue;
            };
            if !schema.is_entity_type(&etype) {
                diag.unknown_type_items += 1;
            }
            atoms.insert_entity(EntityAtom::new(sentence_id, surface, etype));
        }
    }

    for list in get_ci(&object, "relationships") {
        let Some(items) = list.as_array() else {
            diag.drop_item("relationships value is not an array".into());
            continue;
        };
        for (i, item) in items.iter().enumerate() {
            let Some(item) = item.as_object() else {
                diag.drop_item(format!("relationship {i} is not an object"));
                continue;
            };
            let fields = (
                string_field(item, "subject"),
                string_field(item, "object"),
                string_field(item, "type"),
            );
            let (Some(subject), Some(obj), Some(rtype)) = fields else {
                diag.drop_item(format!("relationship {i} lacks subject/object/type"));
                continue;
            };
            let (Ok(subject), Ok(obj), Ok(rtype)) =
                (canon.surface(&subject), canon.surface(&obj), canonicalize_label(&rtype))
            else {
                diag.drop_item(format!("relationship {i} has an empty field"));
                continue;
            };
            if !schema.is_relation_type(&rtype) {
                diag.unknown_type_items += 1;
            }
            // Dangling endpoints are kept; the consistency checker flags them.
            atoms.insert_relation(RelationAtom::new(sentence_id, subject, obj, rtype));
        }
    }
    Ok((atoms, diag))
}

/// Like [`parse_prediction`] but total: an unrecoverable reply becomes an
/// empty prediction with the error noted in the diagnostics.
pub fn parse_or_empty(raw: &str, sentence_id: &str, schema: &LabelSchema, canon: Canonicalizer) -> (AtomSet, ParseDiagnostics) {
    match parse_prediction(raw, sentence_id, schema, canon) {
        Ok(parsed) => parsed,
        Err(e) => {
            let mut diag = ParseDiagnostics::new(sentence_id);
            diag.parse_error = Some(e.to_string());
            (AtomSet::new(), diag)
        }
    }
}

/// Serializes atoms in the reply shape the prompt asks for.
pub fn prediction_to_output_json(atoms: &AtomSet) -> Value {
    let entities: Vec<Value> = atoms
        .entities
        .iter()
        .map(|e| json!({"Entity": e.surface, "Type": e.etype}))
        .collect();
    let relations: Vec<Value> = atoms
        .relations
        .iter()
        .map(|r| json!({"Subject": r.subject, "Object": r.object, "Type": r.rtype}))
        .collect();
    json!({"Entities": entities, "Relationships": relations})
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityItem {
    pub surface: String,
    #[serde(rename = "type")]
    pub etype: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationItem {
    pub subject: String,
    pub object: String,
    #[serde(rename = "type")]
    pub rtype: String,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence_id: String,
    pub entities: Vec<EntityItem>,
    pub relations: Vec<RelationItem>,
    #[serde(default)]
    pub diagnostics: ParseDiagnostics,
}

impl PredictionRecord {
    pub fn new(sentence_id: &str, atoms: &AtomSet, diagnostics: ParseDiagnostics) -> Self {
        let own = atoms.for_sentence(sentence_id);
        Self {
            sentence_id: sentence_id.to_string(),
            entities: own
                .entities
                .into_iter()
                .map(|e| EntityItem { surface: e.surface, etype: e.etype })
                .collect(),
            relations: own
                .relations
                .into_iter()
                .map(|r| RelationItem { subject: r.subject, object: r.object, rtype: r.rtype })
                .collect(),
            diagnostics,
        }
    }

    pub fn atoms(&self) -> AtomSet {
        let mut set = AtomSet::new();
        for e in &self.entities {
            set.insert_entity(EntityAtom::new(&self.sentence_id, &e.surface, &e.etype));
        }
        for r in &self.relations {
            set.insert_relation(RelationAtom::new(&self.sentence_id, &r.subject, &r.object, &r.rtype));
        }
        set
    }
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), Error> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Union of all records' atoms.
pub fn records_to_atoms(records: &[PredictionRecord]) -> AtomSet {
    let mut set = AtomSet::new();
    for record in records {
        set.extend(record.atoms());
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = r#"{"Entities":[{"Entity":"Andrew Jackson","Type":"Peop"}],"Relationships":[{"Subject":"Andrew Jackson","Object":"Waxhaw","Type":"Live_In"}]}"#;

    fn schema() -> LabelSchema {
        LabelSchema::new(["Peop", "Loc", "Org", "Other"], ["Live_In", "Work_For", "Kill"]).unwrap()
    }

    fn parse(raw: &str) -> Result<(AtomSet, ParseDiagnostics), ParseError> {
        parse_prediction(raw, "s", &schema(), Canonicalizer::default())
    }

    #[test]
    fn clean_reply() {
        let (atoms, diag) = parse(EXAMPLE).unwrap();
        assert!(atoms.entities.contains(&EntityAtom::new("s", "andrew jackson", "peop")));
        assert!(atoms.relations.contains(&RelationAtom::new("s", "andrew jackson", "waxhaw", "live_in")));
        assert_eq!(atoms.entities.len(), 1);
        assert!(diag.repairs_applied.is_empty());
        assert_eq!(diag.dropped_items, 0);
    }

    #[test]
    fn fenced_reply() {
        let fenced = format!("```json\n{EXAMPLE}\n```");
        let (atoms, diag) = parse(&fenced).unwrap();
        assert_eq!(atoms, parse(EXAMPLE).unwrap().0);
        assert_eq!(diag.repairs_applied, vec![RepairTag::CodeFenceStrip]);
    }

    #[test]
    fn no_json_is_error() {
        assert!(parse("Sure! Here are the results:").is_err());
        let (atoms, diag) = parse_or_empty("Sure! Here are the results:", "s", &schema(), Canonicalizer::default());
        assert!(atoms.is_empty());
        assert!(diag.parse_error.is_some());
    }

    #[test]
    fn preamble_and_trailer() {
        let raw = format!("Here you go: {EXAMPLE} Hope this helps!");
        let (atoms, diag) = parse(&raw).unwrap();
        assert_eq!(atoms.entities.len(), 1);
        assert_eq!(diag.repairs_applied, vec![RepairTag::OuterTextStrip]);
    }

    #[test]
    fn newline_inside_string() {
        let raw = "{\"entities\": [{\"entity\": \"New\nYork\", \"type\": \"Loc\"}]}";
        let (atoms, diag) = parse(raw).unwrap();
        assert!(atoms.entities.contains(&EntityAtom::new("s", "new york", "loc")));
        assert_eq!(diag.repairs_applied, vec![RepairTag::NewlineRemoval]);
    }

    #[test]
    fn single_quotes_and_trailing_commas() {
        let raw = "{'entities': [{'entity': 'O\\'Brien', 'type': 'Peop'},], 'relationships': [],}";
        let (atoms, diag) = parse(raw).unwrap();
        assert!(atoms.entities.contains(&EntityAtom::new("s", "o'brien", "peop")));
        assert_eq!(diag.repairs_applied, vec![RepairTag::SingleQuoteFix, RepairTag::TrailingCommaDrop]);
    }

    #[test]
    fn apostrophe_in_double_quoted_string_survives() {
        assert_eq!(fix_single_quotes(r#"{"a": "it's", 'b': 'x'}"#), r#"{"a": "it's", "b": "x"}"#);
    }

    #[test]
    fn incomplete_items_dropped_and_unknowns_counted() {
        let raw = r#"{"entities": [{"entity": "a"}, {"entity": "b", "type": "Weapon"}, 3],
                      "relationships": [{"subject": "a", "type": "Kill"}, {"subject": "a", "object": "ghost", "type": "Kill"}]}"#;
        let (atoms, diag) = parse(raw).unwrap();
        assert_eq!(diag.dropped_items, 3);
        assert_eq!(diag.unknown_type_items, 1);
        assert!(atoms.entities.contains(&EntityAtom::new("s", "b", "weapon")));
        // Relation to an entity that was never listed is kept for the checker.
        assert!(atoms.relations.contains(&RelationAtom::new("s", "a", "ghost", "kill")));
    }

    #[test]
    fn unbalanced_example_reply_is_error() {
        // The published example closes the relationship array with `}`.
        let raw = r#"{"Entities":[{"Entity": "Andrew Jackson", "Type":"Peop"}], "Relationships":[{"Subject": "Andrew Jackson","Object": "Waxhaw", "Type": "Live_In"}}"#;
        assert!(parse(raw).is_err());
    }

    #[test]
    fn record_round_trip() {
        let (atoms, diag) = parse(EXAMPLE).unwrap();
        let record = PredictionRecord::new("s", &atoms, diag);
        let line = serde_json::to_string(&record).unwrap();
        let back: PredictionRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.atoms(), atoms);
    }

    fn flip_case(s: &str, mask: u64) -> String {
        s.chars()
            .enumerate()
            .map(|(i, c)| if mask >> (i % 64) & 1 == 1 { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() })
            .collect()
    }

    proptest! {
        #[test]
        fn key_casing_irrelevant(mask in any::<u64>()) {
            let raw = format!(
                r#"{{"{}": [{{"{}": "Acme", "{}": "Org"}}], "{}": [{{"{}": "x", "{}": "Acme", "{}": "Work_For"}}]}}"#,
                flip_case("entities", mask), flip_case("entity", mask >> 3), flip_case("type", mask >> 5),
                flip_case("relationships", mask >> 7), flip_case("subject", mask >> 11),
                flip_case("object", mask >> 13), flip_case("type", mask >> 17),
            );
            let (atoms, _) = parse(&raw).unwrap();
            prop_assert!(atoms.entities.contains(&EntityAtom::new("s", "acme", "org")));
            prop_assert!(atoms.relations.contains(&RelationAtom::new("s", "x", "acme", "work_for")));
        }

        #[test]
        fn reserialization_is_stable(
            ents in proptest::collection::vec(("[A-Za-z][A-Za-z '\"]{0,8}", "[A-Za-z_]{1,6}"), 0..5),
            rels in proptest::collection::vec(("[A-Za-z]{1,5}", "[A-Za-z]{1,5}", "[A-Za-z_]{1,6}"), 0..5),
        ) {
            let mut atoms = AtomSet::new();
            for (s, t) in &ents {
                atoms.insert_entity(EntityAtom::new("s", canonicalize_surface_or(s), canonicalize_label(t).unwrap()));
            }
            for (a, b, t) in &rels {
                atoms.insert_relation(RelationAtom::new("s", a.to_lowercase(), b.to_lowercase(), canonicalize_label(t).unwrap()));
            }
            let text = prediction_to_output_json(&atoms).to_string();
            let (once, _) = parse(&text).unwrap();
            prop_assert_eq!(&once, &atoms);
            let (twice, _) = parse(&prediction_to_output_json(&once).to_string()).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn never_panics(raw in "\\PC{0,120}") {
            let _ = parse_or_empty(&raw, "s", &schema(), Canonicalizer::default());
        }
    }

    fn canonicalize_surface_or(s: &str) -> String {
        crate::model::canonicalize_surface(s).unwrap_or_else(|_| "x".into())
    }
}
