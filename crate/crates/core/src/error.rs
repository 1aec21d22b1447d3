use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// A surface string or label was empty after canonicalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("value is empty after canonicalization")]
pub struct CanonicalizationEmpty;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
    #[error("cannot detokenize an empty token list")]
    EmptyTokens,
    #[error("dataset file is not a JSON array of records: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("prompt field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("unresolved placeholder {{{0}}}")]
    UnresolvedPlaceholder(String),
    #[error("prompt field `{field}` contains placeholder marker {{{placeholder}}}")]
    MarkerInField { field: &'static str, placeholder: String },
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("replay cache has no response for request key {0}")]
    ReplayMiss(String),
    #[error("HTTP {status} from provider after {attempts} attempt(s): {body}")]
    Status { status: u16, attempts: u32, body: String },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed provider response: {0}")]
    Response(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("cache I/O: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no recoverable JSON object in model response: {0}")]
pub struct ParseError(pub String);

#[derive(Debug, Error)]
pub enum FactParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Canonicalization(#[from] CanonicalizationEmpty),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Facts(#[from] FactParseError),
    #[error("label schema: {0}")]
    Schema(String),
    #[error("export failed: {0}")]
    Export(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("harness: {0}")]
    Harness(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
