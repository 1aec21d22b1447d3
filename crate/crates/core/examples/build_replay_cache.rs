//! Turns a file of raw model replies into replay caches keyed like live
//! requests.
//!
//! Usage: build_replay_cache <run.toml> <responses.json>
//!
//! `responses.json` maps "primary" (and optionally "auditor") to one list of
//! replies per repetition, each aligned with the dataset's sentences.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use jere_core::dataset::load_dataset;
use jere_core::gateway::{request_key, Exchange, ModelConfig};
use jere_core::harness::RunConfig;
use jere_core::prompt::PromptSpec;
use jere_core::LabelSchema;

fn write_cache(model: &ModelConfig, run: usize, system: &str, users: &[String], replies: &[String]) {
    assert_eq!(users.len(), replies.len(), "run {run}: reply count does not match sentence count");
    let path = model.for_run(run).cache.expect("model has a cache path");
    let mut out = String::new();
    for (user, reply) in users.iter().zip(replies) {
        let exchange = Exchange {
            request_key: request_key(system, user, &model.model_name, model.temperature),
            raw_response: reply.clone(),
            latency_ms: 0,
            timestamp_ms: 0,
        };
        out.push_str(&serde_json::to_string(&exchange).unwrap());
        out.push('\n');
    }
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(&path, out).unwrap();
    println!("wrote {} ({} exchanges)", path.display(), replies.len());
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: build_replay_cache <run.toml> <responses.json>");
        std::process::exit(2);
    }
    let cfg = RunConfig::load(Path::new(&args[1])).expect("run config");
    let schema = LabelSchema::load(&cfg.dataset.schema).expect("schema");
    let dataset = load_dataset(&cfg.dataset.path, &cfg.dataset.name, &cfg.dataset.split, &schema).expect("dataset");
    let prompt = PromptSpec::load(&cfg.prompt).expect("prompt spec");
    let system = prompt.render_system().unwrap();
    let users: Vec<String> = dataset.sentences.iter().map(|s| prompt.render_user(s).unwrap()).collect();

    let text = fs::read_to_string(&args[2]).expect("responses file");
    let responses: BTreeMap<String, Vec<Vec<String>>> = serde_json::from_str(&text).expect("responses json");
    for (role, runs) in &responses {
        let model = match role.as_str() {
            "primary" => &cfg.primary,
            "auditor" => cfg.auditor.as_ref().expect("auditor model in config"),
            other => panic!("unknown role {other}"),
        };
        for (i, replies) in runs.iter().enumerate() {
            write_cache(model, i + 1, &system, &users, replies);
        }
    }
}
