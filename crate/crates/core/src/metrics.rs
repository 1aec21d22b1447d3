//! True/false positive and false negative accounting, and F1 scores.
//!
//! Counting follows the logic-program definitions used by the checker:
//!
//! * `in_set(S)` holds for every sentence with at least one predicted atom.
//! * Entity TP = predicted ∩ gold; FP = predicted ∖ gold; FN = gold atoms of
//!   `in_set` sentences that were not predicted.
//! * Relation TP = predicted, `ok_type` and gold; FP = predicted, `ok_type`,
//!   not `false_declaration` and not gold; FN = gold relations of `in_set`
//!   sentences that were not predicted.
//!
//! Only declared schema types get a row. [`FnMode::Strict`] drops the
//! `in_set` gate for false negatives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::consistency::DerivedFacts;
use crate::error::Error;
use crate::model::{GoldSet, LabelSchema, PredictionSet};
use crate::scalar::{mean, Scalar};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Tally {
    pub fn is_zero(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

/// Per-type tallies for entities and relations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub entities: BTreeMap<String, Tally>,
    pub relations: BTreeMap<String, Tally>,
}

impl ConfusionCounts {
    pub fn entity_total(&self) -> Tally {
        sum(self.entities.values())
    }

    pub fn relation_total(&self) -> Tally {
        sum(self.relations.values())
    }
}

fn sum<'a>(tallies: impl Iterator<Item = &'a Tally>) -> Tally {
    tallies.fold(Tally::default(), |acc, t| Tally {
        tp: acc.tp + t.tp,
        fp: acc.fp + t.fp,
        fn_: acc.fn_ + t.fn_,
    })
}

/// Which gold atoms can become false negatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FnMode {
    /// Only sentences with at least one predicted atom.
    #[default]
    InSet,
    /// Every gold sentence.
    Strict,
}

pub fn count_confusion(
    pred: &PredictionSet,
    derived: &DerivedFacts,
    gold: &GoldSet,
    schema: &LabelSchema,
    mode: FnMode,
) -> ConfusionCounts {
    let in_set = pred.sentence_ids();
    let gated = |sid: &str| mode == FnMode::Strict || in_set.contains(sid);

    let mut counts = ConfusionCounts {
        entities: schema.entity_types.iter().map(|t| (t.clone(), Tally::default())).collect(),
        relations: schema.relation_types.iter().map(|t| (t.clone(), Tally::default())).collect(),
    };

    for e in &pred.entities {
        if let Some(t) = counts.entities.get_mut(&e.etype) {
            if gold.entities.contains(e) {
                t.tp += 1;
            } else {
                t.fp += 1;
            }
        }
    }
    for e in &gold.entities {
        if let Some(t) = counts.entities.get_mut(&e.etype) {
            if gated(&e.sentence_id) && !pred.entities.contains(e) {
                t.fn_ += 1;
            }
        }
    }

    for r in &pred.relations {
        let Some(t) = counts.relations.get_mut(&r.rtype) else {
            continue;
        };
        if !derived.ok_types.contains(r) {
            continue;
        }
        if gold.relations.contains(r) {
            t.tp += 1;
        } else if !derived.false_declarations.contains(r) {
            t.fp += 1;
        }
    }
    for r in &gold.relations {
        if let Some(t) = counts.relations.get_mut(&r.rtype) {
            if gated(&r.sentence_id) && !pred.relations.contains(r) {
                t.fn_ += 1;
            }
        }
    }
    counts
}

fn f1_of<S: Scalar>(tp: S, fp: S, fn_: S) -> S {
    let two = S::one() + S::one();
    let denom = two * tp + fp + fn_;
    if denom == S::zero() {
        S::zero()
    } else {
        two * tp / denom
    }
}

/// `2tp / (2tp + fp + fn)`, or zero when nothing was predicted or expected.
pub fn f1<S: Scalar>(tp: u64, fp: u64, fn_: u64) -> S {
    f1_of(S::from_count(tp), S::from_count(fp), S::from_count(fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeScore<S> {
    pub tp: S,
    pub fp: S,
    #[serde(rename = "fn")]
    pub fn_: S,
    pub f1: S,
}

/// Scores for one task (entities or relations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScores<S> {
    pub micro_f1: S,
    pub macro_f1: S,
    pub total: TypeScore<S>,
    pub per_type: BTreeMap<String, TypeScore<S>>,
}

impl<S: Scalar> TaskScores<S> {
    fn from_tallies(tallies: &BTreeMap<String, Tally>) -> Self {
        let per_type: BTreeMap<String, TypeScore<S>> = tallies
            .iter()
            .map(|(name, t)| {
                let score = TypeScore {
                    tp: S::from_count(t.tp),
                    fp: S::from_count(t.fp),
                    fn_: S::from_count(t.fn_),
                    f1: f1(t.tp, t.fp, t.fn_),
                };
                (name.clone(), score)
            })
            .collect();
        let total = sum(tallies.values());
        // Types with no predictions and no gold atoms do not enter the macro mean.
        let macro_f1 = mean(tallies.iter().filter(|(_, t)| !t.is_zero()).map(|(name, _)| per_type[name].f1))
            .unwrap_or_else(S::zero);
        Self {
            micro_f1: f1(total.tp, total.fp, total.fn_),
            macro_f1,
            total: TypeScore {
                tp: S::from_count(total.tp),
                fp: S::from_count(total.fp),
                fn_: S::from_count(total.fn_),
                f1: f1(total.tp, total.fp, total.fn_),
            },
            per_type,
        }
    }

    fn map<T>(&self, f: impl Fn(S) -> T) -> TaskScores<T> {
        let map_score = |s: &TypeScore<S>| TypeScore {
            tp: f(s.tp),
            fp: f(s.fp),
            fn_: f(s.fn_),
            f1: f(s.f1),
        };
        TaskScores {
            micro_f1: f(self.micro_f1),
            macro_f1: f(self.macro_f1),
            total: map_score(&self.total),
            per_type: self.per_type.iter().map(|(k, v)| (k.clone(), map_score(v))).collect(),
        }
    }
}

/// Entity (E) and relation (ER) scores of one run, or the mean of several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report<S> {
    pub entities: TaskScores<S>,
    pub relations: TaskScores<S>,
}

pub fn report<S: Scalar>(counts: &ConfusionCounts) -> F1Report<S> {
    F1Report {
        entities: TaskScores::from_tallies(&counts.entities),
        relations: TaskScores::from_tallies(&counts.relations),
    }
}

impl<S: Scalar> F1Report<S> {
    pub fn to_f64(&self) -> F1Report<f64> {
        F1Report {
            entities: self.entities.map(S::to_f64_lossy),
            relations: self.relations.map(S::to_f64_lossy),
        }
    }

    fn same_schema(&self, other: &Self) -> bool {
        self.entities.per_type.keys().eq(other.entities.per_type.keys())
            && self.relations.per_type.keys().eq(other.relations.per_type.keys())
    }
}

fn average_task<S: Scalar>(tasks: &[&TaskScores<S>]) -> TaskScores<S> {
    let avg = |get: &dyn Fn(&TaskScores<S>) -> S| mean(tasks.iter().map(|t| get(t))).unwrap_or_else(S::zero);
    let avg_score = |get: &dyn Fn(&TaskScores<S>) -> TypeScore<S>| TypeScore {
        tp: avg(&|t| get(t).tp),
        fp: avg(&|t| get(t).fp),
        fn_: avg(&|t| get(t).fn_),
        f1: avg(&|t| get(t).f1),
    };
    TaskScores {
        micro_f1: avg(&|t| t.micro_f1),
        macro_f1: avg(&|t| t.macro_f1),
        total: avg_score(&|t| t.total),
        per_type: tasks[0]
            .per_type
            .keys()
            .map(|name| (name.clone(), avg_score(&|t| t.per_type[name])))
            .collect(),
    }
}

/// Element-wise mean of every score and every count across runs.
pub fn average_runs<S: Scalar>(reports: &[F1Report<S>]) -> Result<F1Report<S>, Error> {
    let Some(first) = reports.first() else {
        return Err(Error::Harness("cannot average zero reports".into()));
    };
    if let Some(i) = reports.iter().position(|r| !first.same_schema(r)) {
        return Err(Error::Harness(format!("report {i} has a different label schema than report 0")));
    }
    let entities: Vec<_> = reports.iter().map(|r| &r.entities).collect();
    let relations: Vec<_> = reports.iter().map(|r| &r.relations).collect();
    Ok(F1Report {
        entities: average_task(&entities),
        relations: average_task(&relations),
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// One row per labelled report, in the F1-Micro/F1-Macro × E/ER layout.
pub fn render_score_table(rows: &[(&str, &F1Report<f64>)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:width$} | {:>17} | {:>17}\n{:width$} | {:>8} {:>8} | {:>8} {:>8}\n",
        "", "F1-Micro", "F1-Macro", "Method", "E", "ER", "E", "ER"
    );
    out.push_str(&format!("{}\n", "-".repeat(width + 42)));
    for (label, r) in rows {
        out.push_str(&format!(
            "{:width$} | {:>8} {:>8} | {:>8} {:>8}\n",
            label,
            pct(r.entities.micro_f1),
            pct(r.relations.micro_f1),
            pct(r.entities.macro_f1),
            pct(r.relations.macro_f1)
        ));
    }
    out
}

/// TP/FP/FN totals per task, one row per labelled report.
pub fn render_count_table(rows: &[(&str, &F1Report<f64>)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:width$} | {:>26} | {:>26}\n{:width$} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}\n",
        "", "E", "ER", "Method", "TP", "FP", "FN", "TP", "FP", "FN"
    );
    out.push_str(&format!("{}\n", "-".repeat(width + 60)));
    let n = |x: f64| if x.fract() == 0.0 { format!("{x:.0}") } else { format!("{x:.2}") };
    for (label, r) in rows {
        let (e, er) = (&r.entities.total, &r.relations.total);
        out.push_str(&format!(
            "{:width$} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}\n",
            label,
            n(e.tp),
            n(e.fp),
            n(e.fn_),
            n(er.tp),
            n(er.fp),
            n(er.fn_)
        ));
    }
    out
}

/// Per-type breakdown of one report.
pub fn render_type_table(report: &F1Report<f64>) -> String {
    let mut out = String::new();
    for (task, scores) in [("entity", &report.entities), ("relation", &report.relations)] {
        let width = scores.per_type.keys().map(String::len).max().unwrap_or(0).max(task.len());
        out.push_str(&format!("{task:width$} | {:>8} {:>8} {:>8} | {:>6}\n", "TP", "FP", "FN", "F1"));
        for (name, s) in &scores.per_type {
            out.push_str(&format!(
                "{name:width$} | {:>8} {:>8} {:>8} | {:>6}\n",
                s.tp, s.fp, s.fn_, pct(s.f1)
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::derive;
    use crate::model::{EntityAtom, RelationAtom, TypeSpec};
    use num_rational::Ratio;

    fn schema() -> LabelSchema {
        LabelSchema::new(["peop", "org", "loc"], ["kill", "work_for"]).unwrap()
    }

    #[test]
    fn f1_values() {
        assert!((f1::<f64>(2, 1, 1) - 0.6667).abs() < 1e-4);
        assert_eq!(f1::<f64>(0, 0, 0), 0.0);
        assert!((f1::<f64>(881, 258, 176) - 0.8024).abs() < 5e-4);
        assert_eq!(f1::<Ratio<i64>>(2, 1, 1), Ratio::new(2, 3));
        assert_eq!(f1::<f32>(1, 0, 0), 1.0);
    }

    #[test]
    fn entity_set_arithmetic() {
        let mut pred = PredictionSet::new();
        pred.insert_entity(EntityAtom::new("s1", "a", "peop"));
        pred.insert_entity(EntityAtom::new("s1", "x", "org"));
        let mut gold = GoldSet::new();
        gold.insert_entity(EntityAtom::new("s1", "a", "peop"));
        gold.insert_entity(EntityAtom::new("s1", "b", "loc"));
        let c = count_confusion(&pred, &derive(&pred, &[]), &gold, &schema(), FnMode::InSet);
        assert_eq!(c.entities["peop"], Tally { tp: 1, fp: 0, fn_: 0 });
        assert_eq!(c.entities["org"], Tally { tp: 0, fp: 1, fn_: 0 });
        assert_eq!(c.entities["loc"], Tally { tp: 0, fp: 0, fn_: 1 });
    }

    #[test]
    fn unpredicted_sentence_gives_no_false_negatives() {
        let pred = PredictionSet::new();
        let mut gold = GoldSet::new();
        for s in ["a", "b", "c"] {
            gold.insert_entity(EntityAtom::new("s9", s, "peop"));
        }
        let c = count_confusion(&pred, &derive(&pred, &[]), &gold, &schema(), FnMode::InSet);
        assert_eq!(c.entity_total(), Tally::default());
        let strict = count_confusion(&pred, &derive(&pred, &[]), &gold, &schema(), FnMode::Strict);
        assert_eq!(strict.entity_total().fn_, 3);
    }

    #[test]
    fn type_mismatch_counts_nowhere() {
        let mut pred = PredictionSet::new();
        pred.insert_entity(EntityAtom::new("s1", "a", "peop"));
        pred.insert_entity(EntityAtom::new("s1", "b", "org"));
        let rel = RelationAtom::new("s1", "a", "b", "kill");
        pred.insert_relation(rel.clone());
        let mut gold = GoldSet::new();
        gold.insert_relation(rel);
        let specs = [TypeSpec::new("kill", "peop", "peop")];
        let c = count_confusion(&pred, &derive(&pred, &specs), &gold, &schema(), FnMode::InSet);
        assert_eq!(c.relations["kill"], Tally::default());
    }

    #[test]
    fn unknown_types_have_no_rows() {
        let mut pred = PredictionSet::new();
        pred.insert_entity(EntityAtom::new("s1", "a", "weapon"));
        let c = count_confusion(&pred, &derive(&pred, &[]), &GoldSet::new(), &schema(), FnMode::InSet);
        assert!(!c.entities.contains_key("weapon"));
        assert_eq!(c.entity_total(), Tally::default());
    }

    #[test]
    fn macro_is_unweighted_over_supported_types() {
        let mut counts = ConfusionCounts::default();
        counts.relations.insert("kill".into(), Tally { tp: 3, fp: 0, fn_: 0 });
        counts.relations.insert("work_for".into(), Tally { tp: 0, fp: 2, fn_: 1 });
        counts.relations.insert("live_in".into(), Tally::default());
        let r = report::<f64>(&counts);
        assert_eq!(r.relations.macro_f1, 0.5);
        assert_eq!(r.entities.macro_f1, 0.0);
    }

    #[test]
    fn published_count_triples() {
        let micro = |tp, fp, fn_| {
            let mut counts = ConfusionCounts::default();
            counts.relations.insert("r".into(), Tally { tp, fp, fn_ });
            report::<f64>(&counts).relations.micro_f1
        };
        assert!((micro(339, 482, 614) - 0.3822).abs() < 5e-4);
        assert!((micro(579, 105, 117) - 0.8391).abs() < 5e-4);
    }

    fn single(micro: f64) -> F1Report<f64> {
        let mut counts = ConfusionCounts::default();
        counts.entities.insert("peop".into(), Tally { tp: 1, fp: 0, fn_: 0 });
        counts.relations.insert("kill".into(), Tally { tp: 1, fp: 1, fn_: 0 });
        let mut r = report::<f64>(&counts);
        r.entities.micro_f1 = micro;
        r
    }

    #[test]
    fn averaging() {
        let avg = average_runs(&[single(0.80), single(0.81), single(0.79)]).unwrap();
        assert!((avg.entities.micro_f1 - 0.80).abs() < 1e-12);
        assert_eq!(average_runs(&[single(0.5)]).unwrap(), single(0.5));
        assert!(average_runs::<f64>(&[]).is_err());

        let mut other = single(0.5);
        other.relations.per_type.insert("live_in".into(), other.relations.per_type["kill"]);
        assert!(matches!(average_runs(&[single(0.5), other]), Err(Error::Harness(_))));
    }

    #[test]
    fn exact_averaging_of_counts() {
        let make = |tp| {
            let mut counts = ConfusionCounts::default();
            counts.entities.insert("peop".into(), Tally { tp, fp: 1, fn_: 0 });
            counts.relations.insert("kill".into(), Tally::default());
            report::<Ratio<i64>>(&counts)
        };
        let avg = average_runs(&[make(1), make(2)]).unwrap();
        assert_eq!(avg.entities.total.tp, Ratio::new(3, 2));
        // (2/3 + 4/5) / 2
        assert_eq!(avg.entities.micro_f1, Ratio::new(11, 15));
    }

    #[test]
    fn tables_render() {
        let r = single(0.8045);
        let table = render_score_table(&[("GPT+ASP", &r)]);
        assert!(table.contains("80.45"));
        assert!(render_count_table(&[("GPT", &r)]).contains("GPT"));
        assert!(render_type_table(&r).contains("kill"));
    }
}
