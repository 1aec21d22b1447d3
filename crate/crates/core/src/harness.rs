//! End-to-end experiments: prompt every sentence, parse, optionally merge
//! with an auditor model, run the checker, score, and repeat.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::consistency::{self, DerivedFacts};
use crate::dataset::{load_dataset, Dataset, SplitSpec};
use crate::ensemble::ensemble_predict;
use crate::error::Error;
use crate::facts::{export_asp_facts, load_type_specs};
use crate::gateway::{ChatRequest, Gateway, ModelConfig};
use crate::metrics::{self, count_confusion, ConfusionCounts, F1Report, FnMode};
use crate::model::{Canonicalizer, LabelSchema, PredictionSet, TypeSpec};
use crate::parse::{parse_or_empty, write_predictions, ParseDiagnostics, PredictionRecord};
use crate::prompt::PromptSpec;

/// Appended to the user prompt when a reply could not be parsed.
pub const REPROMPT_SUFFIX: &str = " Respond with exactly one JSON object and nothing else.";

pub const MAX_REPROMPTS: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    #[serde(default = "default_split")]
    pub split: String,
    /// SpERT-format JSON file.
    pub path: PathBuf,
    /// SpERT `*_types.json` file.
    pub schema: PathBuf,
}

fn default_split() -> String {
    "test".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Flags {
    pub use_asp_checker: bool,
    pub use_type_specs: bool,
    pub ensemble: bool,
    pub strict_fn: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            use_asp_checker: true,
            use_type_specs: true,
            ensemble: false,
            strict_fn: false,
        }
    }
}

fn default_repetitions() -> usize {
    3
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetRef,
    pub prompt: PathBuf,
    pub primary: ModelConfig,
    #[serde(default)]
    pub auditor: Option<ModelConfig>,
    #[serde(default)]
    pub type_specs: Option<PathBuf>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Seeded sample used for fine-tune export.
    #[serde(default)]
    pub sample: Option<SplitSpec>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub max_reprompts: u8,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a run config and resolves every relative path against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.path);
        fix(&mut self.dataset.schema);
        fix(&mut self.prompt);
        fix(&mut self.output_dir);
        if let Some(p) = self.type_specs.as_mut() {
            fix(p);
        }
        for model in std::iter::once(&mut self.primary).chain(self.auditor.as_mut()) {
            if let Some(p) = model.cache.as_mut() {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.max_reprompts > MAX_REPROMPTS {
            return bad("max_reprompts must be 0, 1 or 2");
        }
        if self.flags.use_type_specs && self.type_specs.is_none() {
            return bad("use_type_specs is set but no type_specs file is given");
        }
        if self.flags.ensemble && self.auditor.is_none() {
            return bad("ensemble is set but no auditor model is configured");
        }
        self.primary.validate()?;
        if let Some(auditor) = &self.auditor {
            auditor.validate()?;
        }
        Ok(())
    }

    pub fn fn_mode(&self) -> FnMode {
        if self.flags.strict_fn {
            FnMode::Strict
        } else {
            FnMode::InSet
        }
    }
}

/// Per-run counts of degraded sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub sentences: usize,
    pub request_failures: usize,
    pub parse_failures: usize,
    pub repaired_responses: usize,
    pub dropped_items: usize,
    pub unknown_type_items: usize,
    pub reprompts: usize,
}

impl RunStats {
    fn absorb(&mut self, diag: &ParseDiagnostics) {
        if diag.parse_error.is_some() {
            self.parse_failures += 1;
        }
        if !diag.repairs_applied.is_empty() {
            self.repaired_responses += 1;
        }
        self.dropped_items += diag.dropped_items;
        self.unknown_type_items += diag.unknown_type_items;
    }
}

/// Prompts the model for every sentence and parses the replies. Failed
/// requests and unparseable replies become empty predictions; up to
/// `max_reprompts` follow-up requests are made for unparseable ones.
pub fn predict(
    dataset: &Dataset,
    prompt: &PromptSpec,
    gateway: &Gateway,
    parallelism: usize,
    max_reprompts: u8,
) -> Result<(Vec<PredictionRecord>, RunStats), Error> {
    let system = prompt.render_system()?;
    let users = dataset
        .sentences
        .iter()
        .map(|s| prompt.render_user(s))
        .collect::<Result<Vec<_>, _>>()?;
    let canon = Canonicalizer::default();
    let schema = &dataset.schema;

    let mut stats = RunStats {
        sentences: dataset.sentences.len(),
        ..RunStats::default()
    };
    let mut outcomes: Vec<(PredictionSet, ParseDiagnostics)> = Vec::with_capacity(users.len());
    let requests: Vec<ChatRequest> = users
        .iter()
        .map(|u| ChatRequest { system: system.clone(), user: u.clone() })
        .collect();
    for (sentence, reply) in dataset.sentences.iter().zip(gateway.batch_complete(&requests, parallelism)) {
        outcomes.push(match reply {
            Ok(raw) => parse_or_empty(&raw, &sentence.id, schema, canon),
            Err(e) => {
                warn!(sentence = %sentence.id, error = %e, "request failed");
                stats.request_failures += 1;
                let diag = ParseDiagnostics {
                    sentence_id: sentence.id.clone(),
                    parse_error: Some(format!("request failed: {e}")),
                    ..ParseDiagnostics::default()
                };
                (PredictionSet::new(), diag)
            }
        });
    }

    let mut suffix = String::new();
    for _ in 0..max_reprompts {
        let pending: Vec<usize> = outcomes
            .iter()
            .enumerate()
            .filter(|(_, (_, d))| d.parse_error.as_deref().is_some_and(|e| !e.starts_with("request failed")))
            .map(|(i, _)| i)
            .collect();
        if pending.is_empty() {
            break;
        }
        suffix.push_str(REPROMPT_SUFFIX);
        let retry: Vec<ChatRequest> = pending
            .iter()
            .map(|&i| ChatRequest { system: system.clone(), user: format!("{}{suffix}", users[i]) })
            .collect();
        stats.reprompts += retry.len();
        for (&i, reply) in pending.iter().zip(gateway.batch_complete(&retry, parallelism)) {
            if let Ok(raw) = reply {
                let id = &dataset.sentences[i].id;
                let parsed = parse_or_empty(&raw, id, schema, canon);
                if parsed.1.parse_error.is_none() {
                    outcomes[i] = parsed;
                }
            }
        }
    }

    let records = dataset
        .sentences
        .iter()
        .zip(outcomes)
        .map(|(s, (atoms, diag))| {
            stats.absorb(&diag);
            PredictionRecord::new(&s.id, &atoms, diag)
        })
        .collect();
    Ok((records, stats))
}

/// Checker output for a prediction set. With the checker off every
/// prediction is accepted.
pub fn check_predictions(pred: &PredictionSet, specs: &BTreeSet<TypeSpec>, enabled: bool) -> (PredictionSet, DerivedFacts) {
    if enabled {
        consistency::check(pred, specs)
    } else {
        (pred.clone(), DerivedFacts::vacuous(pred))
    }
}

/// Artifacts of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run: usize,
    pub stats: RunStats,
    pub counts: ConfusionCounts,
    pub report: F1Report<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutcome>,
    pub mean: F1Report<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn full_report_text(label: &str, report: &F1Report<f64>) -> String {
    let rows = [(label, report)];
    format!(
        "{}\n{}\n{}",
        metrics::render_score_table(&rows),
        metrics::render_count_table(&rows),
        metrics::render_type_table(report)
    )
}

/// Runs every repetition and writes per-run artifacts under
/// `output_dir/run<N>/` plus `summary.json` and `summary.txt`.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutcome, Error> {
    cfg.validate()?;
    let schema = LabelSchema::load(&cfg.dataset.schema)?;
    let prompt = PromptSpec::load(&cfg.prompt)?;
    let specs = match (&cfg.type_specs, cfg.flags.use_type_specs) {
        (Some(path), true) => load_type_specs(path)?,
        _ => BTreeSet::new(),
    };
    let dataset = load_dataset(&cfg.dataset.path, &cfg.dataset.name, &cfg.dataset.split, &schema)?;
    // Build every gateway first so configuration problems surface before
    // any request is sent.
    let mut gateways = Vec::with_capacity(cfg.repetitions);
    for run in 1..=cfg.repetitions {
        let primary = Gateway::new(cfg.primary.for_run(run))?;
        let auditor = match (&cfg.auditor, cfg.flags.ensemble) {
            (Some(a), true) => Some(Gateway::new(a.for_run(run))?),
            _ => None,
        };
        gateways.push((primary, auditor));
    }
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;

    let mut runs = Vec::with_capacity(cfg.repetitions);
    for (i, (primary, auditor)) in gateways.iter().enumerate() {
        let run = i + 1;
        let dir = cfg.output_dir.join(format!("run{run}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let (records, mut stats) = predict(&dataset, &prompt, primary, cfg.parallelism, cfg.max_reprompts)?;
        write_predictions(&dir.join("predictions.jsonl"), &records)?;
        let mut pred = crate::parse::records_to_atoms(&records);
        if let Some(auditor) = auditor {
            let (audit_records, audit_stats) = predict(&dataset, &prompt, auditor, cfg.parallelism, cfg.max_reprompts)?;
            write_predictions(&dir.join("auditor_predictions.jsonl"), &audit_records)?;
            write_json(&dir.join("auditor_stats.json"), &audit_stats)?;
            pred = ensemble_predict(&pred, &crate::parse::records_to_atoms(&audit_records));
            stats.request_failures += audit_stats.request_failures;
        }

        let (filtered, derived) = check_predictions(&pred, &specs, cfg.flags.use_asp_checker);
        let filtered_records: Vec<PredictionRecord> = dataset
            .sentences
            .iter()
            .map(|s| {
                let diag = ParseDiagnostics { sentence_id: s.id.clone(), ..ParseDiagnostics::default() };
                PredictionRecord::new(&s.id, &filtered, diag)
            })
            .collect();
        write_predictions(&dir.join("filtered.jsonl"), &filtered_records)?;
        write_json(&dir.join("derived.json"), &derived)?;
        write_text(&dir.join("facts.lp"), &export_asp_facts(&pred, Some(&dataset.gold), &specs, &schema))?;

        let counts = count_confusion(&pred, &derived, &dataset.gold, &schema, cfg.fn_mode());
        let report: F1Report<f64> = metrics::report(&counts);
        write_json(&dir.join("stats.json"), &stats)?;
        write_json(&dir.join("report.json"), &report)?;
        write_text(&dir.join("report.txt"), &full_report_text(&format!("run{run}"), &report))?;
        info!(
            run,
            e_micro = report.entities.micro_f1,
            er_micro = report.relations.micro_f1,
            failures = stats.request_failures + stats.parse_failures,
            "run finished"
        );
        runs.push(RunOutcome { run, stats, counts, report });
    }

    let reports: Vec<F1Report<f64>> = runs.iter().map(|r| r.report.clone()).collect();
    let mean = metrics::average_runs(&reports)?;
    let outcome = ExperimentOutcome { runs, mean };
    write_json(&cfg.output_dir.join("summary.json"), &outcome)?;
    let mut rows: Vec<(String, &F1Report<f64>)> = outcome.runs.iter().map(|r| (format!("run{}", r.run), &r.report)).collect();
    rows.push(("mean".into(), &outcome.mean));
    let rows: Vec<(&str, &F1Report<f64>)> = rows.iter().map(|(l, r)| (l.as_str(), *r)).collect();
    write_text(
        &cfg.output_dir.join("summary.txt"),
        &format!("{}\n{}", metrics::render_score_table(&rows), metrics::render_count_table(&rows)),
    )?;
    Ok(outcome)
}
