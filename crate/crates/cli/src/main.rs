use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use jere_core::consistency;
use jere_core::dataset::{export_finetune_file, load_dataset, parse_fraction, sample_split, Dataset, FineTuneParams, SplitSpec};
use jere_core::ensemble::ensemble_predict;
use jere_core::facts::{export_asp_facts, load_type_specs};
use jere_core::gateway::{Gateway, ModelConfig};
use jere_core::harness::{self, check_predictions, RunConfig};
use jere_core::metrics::{self, count_confusion, FnMode};
use jere_core::parse::{read_predictions, records_to_atoms, write_predictions, PredictionRecord};
use jere_core::prompt::PromptSpec;
use jere_core::{LabelSchema, Report, Sentence, TypeSpec};

#[derive(Parser)]
#[command(name = "jere", version, about = "Joint entity and relation extraction with LLMs and a rule-based checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A SpERT-format split plus its types file.
#[derive(Args)]
struct DatasetArgs {
    /// SpERT JSON file
    #[arg(long)]
    input: PathBuf,
    /// SpERT *_types.json file
    #[arg(long)]
    types: PathBuf,
    #[arg(long, default_value = "dataset")]
    name: String,
    #[arg(long, default_value = "test")]
    split: String,
}

impl DatasetArgs {
    fn load(&self) -> Result<Dataset> {
        let schema = LabelSchema::load(&self.types)?;
        Ok(load_dataset(&self.input, &self.name, &self.split, &schema)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load a SpERT split and report sentence counts and surface relocation.
    Ingest {
        #[command(flatten)]
        data: DatasetArgs,
        /// Write the loaded sentences and gold atoms as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the rendered system and user prompts for one text.
    Render {
        #[arg(long)]
        prompt: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Prompt a model for every sentence and write a predictions file.
    Predict {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        prompt: PathBuf,
        /// Model config (TOML)
        #[arg(long, required_unless_present = "ensemble", conflicts_with = "ensemble")]
        model: Option<PathBuf>,
        /// Primary and auditor model configs; keeps entities both agree on
        #[arg(long, num_args = 2, value_names = ["PRIMARY", "AUDITOR"])]
        ensemble: Option<Vec<PathBuf>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[arg(long, default_value_t = 0)]
        max_reprompts: u8,
    },
    /// Run the consistency checker over a predictions file.
    Check {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        type_specs: Option<PathBuf>,
        /// Filtered predictions
        #[arg(long)]
        out: PathBuf,
        /// Derived facts as JSON
        #[arg(long)]
        derived: Option<PathBuf>,
    },
    /// Score a predictions file against gold annotations.
    Score {
        #[arg(long)]
        predictions: PathBuf,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        type_specs: Option<PathBuf>,
        /// Count every prediction as well-typed (no checker)
        #[arg(long)]
        no_checker: bool,
        /// Count false negatives in every sentence, not only answered ones
        #[arg(long)]
        strict_fn: bool,
        /// Also write the report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a full experiment from a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        no_checker: bool,
        #[arg(long)]
        no_type_specs: bool,
        #[arg(long)]
        ensemble: bool,
        #[arg(long)]
        strict_fn: bool,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write a chat-format fine-tuning file from a seeded sample of a split.
    ExportFinetune {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        prompt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sample fraction, e.g. 0.10 or 1/10
        #[arg(long, default_value = "1")]
        fraction: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write predictions (and optionally gold and type specs) as ASP facts.
    ExportFacts {
        #[arg(long)]
        predictions: PathBuf,
        /// Types file that supplies the label schema
        #[arg(long)]
        types: PathBuf,
        /// SpERT split whose gold atoms are included
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        type_specs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_specs(path: Option<&Path>) -> Result<BTreeSet<TypeSpec>> {
    Ok(match path {
        Some(p) => load_type_specs(p)?,
        None => BTreeSet::new(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gateway(path: &Path) -> Result<Gateway> {
    let cfg = ModelConfig::load(path)?;
    Ok(Gateway::new(cfg)?)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Ingest { data, out } => {
            let dataset = data.load()?;
            let (rate, misses) = dataset.relocation_rate();
            println!("sentences: {}", dataset.sentences.len());
            println!("gold entities: {}", dataset.gold.entities.len());
            println!("gold relations: {}", dataset.gold.relations.len());
            println!("entity types: {}", dataset.schema.entity_types.len());
            println!("relation types: {}", dataset.schema.relation_types.len());
            println!("surface relocation: {:.2}% ({} misses)", rate * 100.0, misses.len());
            if let Some(out) = out {
                dataset.write_dump(&out)?;
            }
        }
        Command::Render { prompt, text } => {
            let spec = PromptSpec::load(&prompt)?;
            let sentence = Sentence { id: "render:0".into(), text };
            println!("--- system ---\n{}\n--- user ---\n{}", spec.render_system()?, spec.render_user(&sentence)?);
        }
        Command::Predict { data, prompt, model, ensemble, out, parallelism, max_reprompts } => {
            let dataset = data.load()?;
            let spec = PromptSpec::load(&prompt)?;
            let records = match (model, ensemble) {
                (Some(model), None) => {
                    let (records, stats) = harness::predict(&dataset, &spec, &gateway(&model)?, parallelism, max_reprompts)?;
                    eprintln!("{}", serde_json::to_string(&stats)?);
                    records
                }
                (None, Some(pair)) => {
                    let (primary, auditor) = (gateway(&pair[0])?, gateway(&pair[1])?);
                    let (a, _) = harness::predict(&dataset, &spec, &primary, parallelism, max_reprompts)?;
                    let (b, _) = harness::predict(&dataset, &spec, &auditor, parallelism, max_reprompts)?;
                    let merged = ensemble_predict(&records_to_atoms(&a), &records_to_atoms(&b));
                    a.into_iter()
                        .map(|r| PredictionRecord::new(&r.sentence_id, &merged, r.diagnostics))
                        .collect()
                }
                _ => bail!("give either --model or --ensemble"),
            };
            write_predictions(&out, &records)?;
        }
        Command::Check { predictions, type_specs, out, derived } => {
            let records = read_predictions(&predictions)?;
            let specs = load_specs(type_specs.as_deref())?;
            let (filtered, facts) = consistency::check(&records_to_atoms(&records), &specs);
            let kept: Vec<PredictionRecord> = records
                .iter()
                .map(|r| PredictionRecord::new(&r.sentence_id, &filtered, r.diagnostics.clone()))
                .collect();
            write_predictions(&out, &kept)?;
            if let Some(path) = derived {
                write(&path, &(serde_json::to_string_pretty(&facts)? + "\n"))?;
            }
            println!(
                "relations: {} in, {} kept, {} false declarations",
                records_to_atoms(&records).relations.len(),
                filtered.relations.len(),
                facts.false_declarations.len()
            );
        }
        Command::Score { predictions, data, type_specs, no_checker, strict_fn, json } => {
            let dataset = data.load()?;
            let pred = records_to_atoms(&read_predictions(&predictions)?);
            let specs = load_specs(type_specs.as_deref())?;
            let (_, derived) = check_predictions(&pred, &specs, !no_checker);
            let mode = if strict_fn { FnMode::Strict } else { FnMode::InSet };
            let counts = count_confusion(&pred, &derived, &dataset.gold, &dataset.schema, mode);
            let report: Report = metrics::report(&counts);
            let rows = [("score", &report)];
            println!("{}", metrics::render_score_table(&rows));
            println!("{}", metrics::render_count_table(&rows));
            print!("{}", metrics::render_type_table(&report));
            if let Some(path) = json {
                write(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            }
        }
        Command::Run { config, no_checker, no_type_specs, ensemble, strict_fn, output_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.flags.use_asp_checker &= !no_checker;
            cfg.flags.use_type_specs &= !no_type_specs;
            cfg.flags.ensemble |= ensemble;
            cfg.flags.strict_fn |= strict_fn;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let outcome = harness::run_experiment(&cfg)?;
            let mut rows: Vec<(String, &Report)> =
                outcome.runs.iter().map(|r| (format!("run{}", r.run), &r.report)).collect();
            rows.push(("mean".into(), &outcome.mean));
            let rows: Vec<(&str, &Report)> = rows.iter().map(|(l, r)| (l.as_str(), *r)).collect();
            println!("{}", metrics::render_score_table(&rows));
            println!("artifacts in {}", cfg.output_dir.display());
        }
        Command::ExportFinetune { data, prompt, out, fraction, seed } => {
            let dataset = data.load()?;
            let spec = PromptSpec::load(&prompt)?;
            let split = SplitSpec::new(parse_fraction(&fraction)?, seed)?;
            let sample = sample_split(&dataset.sentences, &split);
            let n = export_finetune_file(&sample, &dataset.gold, &spec, &out)?;
            let params = out.with_file_name("finetune_params.json");
            write(&params, &(serde_json::to_string_pretty(&FineTuneParams::default())? + "\n"))?;
            println!("wrote {n} examples to {} (of {} sentences)", out.display(), dataset.sentences.len());
        }
        Command::ExportFacts { predictions, types, gold, split, type_specs, out } => {
            let schema = LabelSchema::load(&types)?;
            let pred = records_to_atoms(&read_predictions(&predictions)?);
            let gold = match gold {
                Some(path) => Some(load_dataset(&path, "gold", &split, &schema)?.gold),
                None => None,
            };
            let specs = load_specs(type_specs.as_deref())?;
            write(&out, &export_asp_facts(&pred, gold.as_ref(), &specs, &schema))?;
        }
    }
    Ok(())
}

