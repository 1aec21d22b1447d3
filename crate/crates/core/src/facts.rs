//! ASP fact files: writing predictions, gold atoms and type specifications as
//! ground facts, and reading them back.
//!
//! Exported files contain one fact per line, sorted, with every argument a
//! quoted string so an external solver sees exactly the same constants.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, FactParseError};
use crate::model::{canonicalize_label, EntityAtom, GoldSet, LabelSchema, PredictionSet, RelationAtom, TypeSpec};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn fact(name: &str, args: &[&str]) -> String {
    let args: Vec<String> = args.iter().map(|a| quote(a)).collect();
    format!("{name}({})", args.join(","))
}

/// Renders the checker's input as a sorted fact listing.
pub fn export_asp_facts<'a>(
    pred: &PredictionSet,
    gold: Option<&GoldSet>,
    specs: impl IntoIterator<Item = &'a TypeSpec>,
    schema: &LabelSchema,
) -> String {
    let mut lines = BTreeSet::new();
    for e in &pred.entities {
        lines.insert(format!("atom({}).", fact("ent", &[&e.sentence_id, &e.surface, &e.etype])));
    }
    for r in &pred.relations {
        lines.insert(format!("atom({}).", fact("rel", &[&r.sentence_id, &r.subject, &r.object, &r.rtype])));
    }
    if let Some(gold) = gold {
        for e in &gold.entities {
            lines.insert(format!("{}.", fact("ent", &[&e.sentence_id, &e.surface, &e.etype])));
        }
        for r in &gold.relations {
            lines.insert(format!("{}.", fact("rel", &[&r.sentence_id, &r.subject, &r.object, &r.rtype])));
        }
    }
    for s in specs {
        lines.insert(format!("{}.", fact("type_def", &[&s.rtype, &s.subject_etype, &s.object_etype])));
    }
    for t in &schema.entity_types {
        lines.insert(format!("{}.", fact("type_of_ent", &[t])));
    }
    for t in &schema.relation_types {
        lines.insert(format!("{}.", fact("type_of_r", &[t])));
    }
    let mut out = String::new();
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// A ground term: a constant, a string, or a compound `f(t1, ..., tn)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Str(String),
    Const(String),
    Compound(String, Vec<Term>),
}

impl Term {
    fn as_text(&self) -> Option<&str> {
        match self {
            Term::Str(s) | Term::Const(s) => Some(s),
            Term::Compound(..) => None,
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self { chars: text.char_indices().peekable(), line: 1 }
    }

    fn err(&self, message: impl Into<String>) -> FactParseError {
        FactParseError::Syntax { line: self.line, message: message.into() }
    }

    fn skip_blank(&mut self) {
        while let Some(&(_, c)) = self.chars.peek() {
            if c == '\n' {
                self.line += 1;
                self.chars.next();
            } else if c.is_whitespace() {
                self.chars.next();
            } else if c == '%' {
                while let Some(&(_, c)) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.chars.next();
                }
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_blank();
        self.chars.peek().map(|&(_, c)| c)
    }

    fn expect(&mut self, want: char) -> Result<(), FactParseError> {
        match self.peek() {
            Some(c) if c == want => {
                self.chars.next();
                Ok(())
            }
            Some(c) => Err(self.err(format!("expected '{want}', found '{c}'"))),
            None => Err(self.err(format!("expected '{want}', found end of input"))),
        }
    }

    fn string(&mut self) -> Result<String, FactParseError> {
        self.chars.next();
        let mut out = String::new();
        loop {
            match self.chars.next() {
                Some((_, '"')) => return Ok(out),
                Some((_, '\\')) => match self.chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, c)) => out.push(c),
                    None => return Err(self.err("unterminated escape")),
                },
                Some((_, '\n')) => return Err(self.err("newline in string")),
                Some((_, c)) => out.push(c),
                None => return Err(self.err("unterminated string")),
            }
        }
    }

    fn word(&mut self) -> String {
        let mut out = String::new();
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_alphanumeric() || c == '_' {
                out.push(c);
                self.chars.next();
            } else {
                break;
            }
        }
        out
    }

    fn term(&mut self) -> Result<Term, FactParseError> {
        match self.peek() {
            Some('"') => Ok(Term::Str(self.string()?)),
            Some(c) if c.is_alphanumeric() || c == '_' => {
                let name = self.word();
                if self.peek() == Some('(') {
                    self.chars.next();
                    let mut args = vec![self.term()?];
                    while self.peek() == Some(',') {
                        self.chars.next();
                        args.push(self.term()?);
                    }
                    self.expect(')')?;
                    Ok(Term::Compound(name, args))
                } else {
                    Ok(Term::Const(name))
                }
            }
            Some(c) => Err(self.err(format!("unexpected '{c}'"))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parses a sequence of ground facts `term.` separated by whitespace or
/// `%` comments. Several facts may share a line.
pub fn parse_terms(text: &str) -> Result<Vec<(usize, Term)>, FactParseError> {
    let mut lexer = Lexer::new(text);
    let mut out = Vec::new();
    while lexer.peek().is_some() {
        let line = lexer.line;
        let term = lexer.term()?;
        lexer.expect('.')?;
        out.push((line, term));
    }
    Ok(out)
}

/// Everything a fact file can hold.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactBase {
    pub predicted: PredictionSet,
    pub gold: GoldSet,
    pub specs: BTreeSet<TypeSpec>,
    pub entity_types: BTreeSet<String>,
    pub relation_types: BTreeSet<String>,
}

fn texts<'t>(line: usize, args: &'t [Term], arity: usize, what: &str) -> Result<Vec<&'t str>, FactParseError> {
    let bad = || FactParseError::Syntax { line, message: format!("{what} expects {arity} constant arguments") };
    if args.len() != arity {
        return Err(bad());
    }
    args.iter().map(|a| a.as_text().ok_or_else(bad)).collect()
}

fn entity(line: usize, args: &[Term]) -> Result<EntityAtom, FactParseError> {
    let a = texts(line, args, 3, "ent")?;
    Ok(EntityAtom::new(a[0], a[1], a[2]))
}

fn relation(line: usize, args: &[Term]) -> Result<RelationAtom, FactParseError> {
    let a = texts(line, args, 4, "rel")?;
    Ok(RelationAtom::new(a[0], a[1], a[2], a[3]))
}

pub fn parse_fact_file(text: &str) -> Result<FactBase, FactParseError> {
    let mut base = FactBase::default();
    for (line, term) in parse_terms(text)? {
        let Term::Compound(name, args) = term else {
            return Err(FactParseError::Syntax { line, message: "expected a compound fact".into() });
        };
        match (name.as_str(), args.as_slice()) {
            ("atom", [Term::Compound(inner, inner_args)]) if inner == "ent" => {
                base.predicted.insert_entity(entity(line, inner_args)?);
            }
            ("atom", [Term::Compound(inner, inner_args)]) if inner == "rel" => {
                base.predicted.insert_relation(relation(line, inner_args)?);
            }
            ("ent", args) => {
                base.gold.insert_entity(entity(line, args)?);
            }
            ("rel", args) => {
                base.gold.insert_relation(relation(line, args)?);
            }
            ("type_def", args) => {
                let a = texts(line, args, 3, "type_def")?;
                base.specs.insert(TypeSpec::new(a[0], a[1], a[2]));
            }
            ("type_of_ent", args) => {
                base.entity_types.insert(texts(line, args, 1, "type_of_ent")?[0].to_string());
            }
            ("type_of_r", args) => {
                base.relation_types.insert(texts(line, args, 1, "type_of_r")?[0].to_string());
            }
            _ => {
                return Err(FactParseError::Syntax { line, message: format!("unknown fact {name}/{}", args.len()) });
            }
        }
    }
    Ok(base)
}

/// Reads a type-specification file: only `type_def/3` facts, labels canonicalized.
pub fn parse_type_specs(text: &str) -> Result<BTreeSet<TypeSpec>, FactParseError> {
    let mut specs = BTreeSet::new();
    for (line, term) in parse_terms(text)? {
        match term {
            Term::Compound(name, args) if name == "type_def" => {
                let a = texts(line, &args, 3, "type_def")?;
                let label = |s: &str| {
                    canonicalize_label(s)
                        .map_err(|_| FactParseError::Syntax { line, message: "empty label in type_def".into() })
                };
                specs.insert(TypeSpec::new(label(a[0])?, label(a[1])?, label(a[2])?));
            }
            _ => {
                return Err(FactParseError::Syntax { line, message: "type-spec files may only contain type_def/3".into() })
            }
        }
    }
    Ok(specs)
}

pub fn load_type_specs(path: &Path) -> Result<BTreeSet<TypeSpec>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_type_specs(&text)?)
}
