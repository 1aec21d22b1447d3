//! Joint entity and relation extraction with prompted language models, a
//! declarative type checker over the predictions, and F1 scoring.

pub mod consistency;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod facts;
pub mod gateway;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod parse;
pub mod prompt;
pub mod scalar;

pub use error::{Error, Result};
pub use model::{AtomSet, Canonicalizer, EntityAtom, GoldSet, LabelSchema, PredictionSet, RelationAtom, Sentence, TypeSpec};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

pub type Report = metrics::F1Report<f64>;
pub type Report32 = metrics::F1Report<f32>;
pub type ExactReport = metrics::F1Report<Rational>;
