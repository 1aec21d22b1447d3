//! Loading SpERT-format benchmark files (CoNLL04, SciERC, ADE).
//!
//! Each record is a tokenized sentence with entity spans and relations that
//! point into the entity list. Records become a [`Sentence`] whose text is
//! rebuilt from the tokens, plus gold atoms keyed by canonical surface form.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::json;
use tracing::warn;

use crate::error::{Error, IngestError};
use crate::model::{canonicalize_label, Canonicalizer, EntityAtom, GoldSet, LabelSchema, RelationAtom, Sentence};
use crate::parse::prediction_to_output_json;
use crate::prompt::PromptSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEntity {
    #[serde(rename = "type")]
    pub etype: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRelation {
    #[serde(rename = "type")]
    pub rtype: String,
    pub head: usize,
    pub tail: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub entities: Vec<RawEntity>,
    #[serde(default)]
    pub relations: Vec<RawRelation>,
    #[serde(default)]
    pub orig_id: Option<serde_json::Value>,
}

impl RawRecord {
    fn validate(&self) -> Result<(), String> {
        if self.tokens.is_empty() {
            return Err("record has no tokens".into());
        }
        for (i, e) in self.entities.iter().enumerate() {
            if e.start >= e.end || e.end > self.tokens.len() {
                return Err(format!(
                    "entity {i} span [{}, {}) out of bounds for {} tokens",
                    e.start,
                    e.end,
                    self.tokens.len()
                ));
            }
        }
        for (i, r) in self.relations.iter().enumerate() {
            if r.head >= self.entities.len() || r.tail >= self.entities.len() {
                return Err(format!(
                    "relation {i} references entity {}/{} but only {} entities exist",
                    r.head,
                    r.tail,
                    self.entities.len()
                ));
            }
        }
        Ok(())
    }
}

const ATTACH_LEFT: &[&str] = &[",", ".", ";", ":", "?", "!", "'", "\u{201d}", ")", "]"];
const ATTACH_RIGHT: &[&str] = &["(", "[", "\u{201c}"];

/// Joins tokens with single spaces, then removes the space before closing
/// punctuation and after opening brackets/quotes.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> Result<String, IngestError> {
    if tokens.is_empty() {
        return Err(IngestError::EmptyTokens);
    }
    let mut out = String::new();
    let mut glue_next = true;
    for token in tokens {
        let token = token.as_ref();
        let attach_left = ATTACH_LEFT.contains(&token) || token.starts_with('\'');
        if !glue_next && !attach_left {
            out.push(' ');
        }
        out.push_str(token);
        glue_next = ATTACH_RIGHT.contains(&token);
    }
    Ok(out)
}

/// Sentences and gold atoms of one dataset split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub split: String,
    pub schema: LabelSchema,
    pub sentences: Vec<Sentence>,
    pub gold: GoldSet,
}

impl Dataset {
    /// Fraction of gold entity surfaces that can be found again,
    /// case-insensitively, in their sentence's text. Returns the misses too.
    pub fn relocation_rate(&self) -> (f64, Vec<EntityAtom>) {
        let texts: std::collections::HashMap<&str, String> =
            self.sentences.iter().map(|s| (s.id.as_str(), s.text.to_lowercase())).collect();
        let mut misses = Vec::new();
        for e in &self.gold.entities {
            let found = texts
                .get(e.sentence_id.as_str())
                .is_some_and(|t| t.contains(&e.surface.to_lowercase()));
            if !found {
                misses.push(e.clone());
            }
        }
        let total = self.gold.entities.len();
        let rate = if total == 0 { 1.0 } else { (total - misses.len()) as f64 / total as f64 };
        (rate, misses)
    }

    pub fn write_dump(&self, path: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_dump(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Parses a SpERT JSON array, reporting the index of the first bad record.
pub fn parse_records(text: &str) -> Result<Vec<RawRecord>, IngestError> {
    let values: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| IngestError::Format(e.to_string()))?;
    values
        .into_iter()
        .enumerate()
        .map(|(index, value)| {
            let record: RawRecord =
                serde_json::from_value(value).map_err(|e| IngestError::Record { index, message: e.to_string() })?;
            record.validate().map_err(|message| IngestError::Record { index, message })?;
            Ok(record)
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<RawRecord>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_records(&text)?)
}

/// Converts raw records to sentences (ids `split:index`) and gold atoms.
pub fn build_dataset(
    name: &str,
    split: &str,
    records: &[RawRecord],
    schema: &LabelSchema,
    canon: Canonicalizer,
) -> Result<Dataset, Error> {
    let mut sentences = Vec::with_capacity(records.len());
    let mut gold = GoldSet::new();
    for (index, record) in records.iter().enumerate() {
        record.validate().map_err(|message| IngestError::Record { index, message })?;
        let id = format!("{split}:{index}");
        let text = detokenize(&record.tokens)?;
        let record_err = |message: String| IngestError::Record { index, message };

        let mut surfaces = Vec::with_capacity(record.entities.len());
        for e in &record.entities {
            let raw = detokenize(&record.tokens[e.start..e.end])?;
            let surface = canon.surface(&raw).map_err(|_| record_err(format!("empty entity span {raw:?}")))?;
            let etype = canonicalize_label(&e.etype).map_err(|_| record_err("empty entity type".into()))?;
            gold.insert_entity(EntityAtom::new(&id, surface.clone(), etype));
            surfaces.push(surface);
        }
        for r in &record.relations {
            let rtype = canonicalize_label(&r.rtype).map_err(|_| record_err("empty relation type".into()))?;
            gold.insert_relation(RelationAtom::new(&id, &surfaces[r.head], &surfaces[r.tail], rtype));
        }
        if text.trim().is_empty() {
            return Err(record_err("sentence text is blank".into()).into());
        }
        sentences.push(Sentence { id, text });
    }
    let unknown = gold.unknown_entities(schema).count() + gold.unknown_relations(schema).count();
    if unknown > 0 {
        warn!(dataset = name, split, unknown, "gold atoms with labels outside the schema");
    }
    Ok(Dataset {
        name: name.to_string(),
        split: split.to_string(),
        schema: schema.clone(),
        sentences,
        gold,
    })
}

/// Loads one SpERT split file.
pub fn load_dataset(path: &Path, name: &str, split: &str, schema: &LabelSchema) -> Result<Dataset, Error> {
    let records = read_records(path)?;
    build_dataset(name, split, &records, schema, Canonicalizer::default())
}

/// Concatenates splits of the same dataset; sentence ids stay unique because
/// they carry the split name.
pub fn merge_datasets(parts: Vec<Dataset>) -> Option<Dataset> {
    let mut iter = parts.into_iter();
    let mut merged = iter.next()?;
    for part in iter {
        merged.split = format!("{}+{}", merged.split, part.split);
        merged.sentences.extend(part.sentences);
        merged.gold.extend(part.gold);
    }
    Some(merged)
}

/// A seeded low-resource sample: `ceil(fraction * N)` records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(deserialize_with = "deserialize_fraction", serialize_with = "serialize_fraction")]
    pub fraction: Ratio<u64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fraction: Ratio<u64>, seed: u64) -> Result<Self, Error> {
        if fraction == Ratio::from_integer(0) || fraction > Ratio::from_integer(1) {
            return Err(Error::Config(format!("sample fraction {fraction} is outside (0, 1]")));
        }
        Ok(Self { fraction, seed })
    }

    pub fn sample_size(&self, n: usize) -> usize {
        let n = n as u64;
        let (num, den) = (*self.fraction.numer(), *self.fraction.denom());
        ((num * n).div_ceil(den)) as usize
    }
}

/// Parses `"0.10"`, `"1/10"` or `"1"` into an exact fraction.
pub fn parse_fraction(text: &str) -> Result<Ratio<u64>, Error> {
    let text = text.trim();
    let bad = || Error::Config(format!("cannot parse fraction {text:?}"));
    if let Some((n, d)) = text.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let den = 10u64.pow(frac.len() as u32);
    let num: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    Ok(Ratio::new(int * den + num, den))
}

fn deserialize_fraction<'de, D: Deserializer<'de>>(de: D) -> Result<Ratio<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    let text = match Repr::deserialize(de)? {
        Repr::Num(x) => x.to_string(),
        Repr::Text(s) => s,
    };
    parse_fraction(&text).map_err(serde::de::Error::custom)
}

fn serialize_fraction<S: serde::Serializer>(f: &Ratio<u64>, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&f.to_string())
}

/// Deterministic uniform sample via a seeded shuffle.
pub fn sample_split<T: Clone>(records: &[T], spec: &SplitSpec) -> Vec<T> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    order
        .into_iter()
        .take(spec.sample_size(records.len()))
        .map(|i| records[i].clone())
        .collect()
}

/// Provider-side fine-tuning hyperparameters. They are recorded next to the
/// exported training file; this crate does not submit jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneParams {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate_multiplier: f64,
}

impl Default for FineTuneParams {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 1,
            learning_rate_multiplier: 2.0,
        }
    }
}

/// Writes one chat-format training line per sentence: system prompt, user
/// prompt, and the gold annotations as the assistant reply. Returns the number
/// of lines written.
pub fn export_finetune_file(
    sentences: &[Sentence],
    gold: &GoldSet,
    prompt: &PromptSpec,
    path: &Path,
) -> Result<usize, Error> {
    let export_err = |e: std::io::Error| Error::Export(format!("{}: {e}", path.display()));
    let system = prompt.render_system()?;
    let file = File::create(path).map_err(export_err)?;
    let mut out = BufWriter::new(file);
    if sentences.is_empty() {
        warn!(path = %path.display(), "no sentences to export; writing an empty fine-tune file");
    }
    for sentence in sentences {
        let user = prompt.render_user(sentence)?;
        let answer = prediction_to_output_json(&gold.for_sentence(&sentence.id));
        let line = json!({
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
                {"role": "assistant", "content": answer.to_string()},
            ]
        });
        writeln!(out, "{line}").map_err(export_err)?;
    }
    out.flush().map_err(export_err)?;
    Ok(sentences.len())
}
