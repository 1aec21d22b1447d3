//! The base JERE prompt template (system + user) and its per-domain fields.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, TemplateError};
use crate::model::Sentence;

const SYSTEM_TEMPLATE: &str = "You are a natural language processing researcher working in the {DOMAIN} domain. \
{EXPERIENCE} Your job is to extract entities from the excerpts of texts given. In this domain, an entity is an \
object, set of objects or abstract notion in the world that has its own independent existence. Entities specify \
pieces of information or objects within a text that carry particular significance. In your work, you will only \
extract specific types of entities and relationships. The types of entities and relationships are defined here. \
{CONTEXT}";

const USER_TEMPLATE: &str = "Give me the entities from the following text. Do not include any explanations, only \
provide RFC8259 compliant JSON response without deviation. Do not include '\\n' (newline) in the output. The keys \
for the output JSON should be {OUTPUT_KEYS}. Do not use any other keys for the JSON response. Ensure that you are \
outputting the entire entity and its type. Here is one example: {EXAMPLE} Evaluate this text: {TEXT}";

const PLACEHOLDERS: &[&str] = &["DOMAIN", "EXPERIENCE", "CONTEXT", "OUTPUT_KEYS", "EXAMPLE", "TEXT"];

/// Domain-specific fields substituted into the base template.
///
/// All five are required; the example makes every prompt one-shot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub domain: String,
    pub experience: String,
    pub context: String,
    pub output_keys: String,
    pub example: String,
}

impl PromptSpec {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let spec: PromptSpec = toml::from_str(text).map_err(|e| Error::Config(format!("prompt spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for (name, value) in self.fields() {
            if value.trim().is_empty() {
                return Err(TemplateError::EmptyField(name));
            }
            if let Some(placeholder) = find_placeholder(value) {
                return Err(TemplateError::MarkerInField { field: name, placeholder });
            }
        }
        Ok(())
    }

    fn fields(&self) -> [(&'static str, &str); 5] {
        [
            ("domain", &self.domain),
            ("experience", &self.experience),
            ("context", &self.context),
            ("output_keys", &self.output_keys),
            ("example", &self.example),
        ]
    }

    pub fn render_system(&self) -> Result<String, TemplateError> {
        self.validate()?;
        render(
            SYSTEM_TEMPLATE,
            &[("DOMAIN", self.domain.trim()), ("EXPERIENCE", self.experience.trim()), ("CONTEXT", self.context.trim())],
        )
    }

    pub fn render_user(&self, sentence: &Sentence) -> Result<String, TemplateError> {
        self.validate()?;
        let text = sentence.text.trim();
        if text.is_empty() {
            return Err(TemplateError::EmptyField("text"));
        }
        if let Some(placeholder) = find_placeholder(text) {
            return Err(TemplateError::MarkerInField { field: "text", placeholder });
        }
        render(
            USER_TEMPLATE,
            &[("OUTPUT_KEYS", self.output_keys.trim()), ("EXAMPLE", self.example.trim()), ("TEXT", text)],
        )
    }
}

/// Substitutes `{NAME}` markers in one left-to-right pass. Markers without a
/// binding are an error; substituted text is never rescanned.
fn render(template: &str, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_marker_name(&after[..close]) => {
                let name = &after[..close];
                let value = bindings
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| TemplateError::UnresolvedPlaceholder(name.to_string()))?;
                out.push_str(value);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn is_marker_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_uppercase() || c == '_')
}

/// Returns the first `{NAME}` placeholder of the template vocabulary found in `text`.
pub fn find_placeholder(text: &str) -> Option<String> {
    PLACEHOLDERS
        .iter()
        .find(|p| text.contains(&format!("{{{p}")))
        .map(|p| p.to_string())
}
