//! Canonical Turtle serialization and a subset parser for round-trips.
//!
//! The emitter writes one sorted subject block per subject with `;`-joined
//! predicates and `,`-joined objects, so serialization is a pure function
//! of the triple set and byte-deterministic. The parser accepts exactly the
//! constructs the emitter produces (plus whitespace/comments), which makes
//! `serialize(parse(serialize(t))) == serialize(t)` a fixpoint.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(String),
    Literal(String),
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Term {
        Term::Iri(s.into())
    }

    pub fn literal(s: impl Into<String>) -> Term {
        Term::Literal(s.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: Term) -> Self {
        Triple { subject: subject.into(), predicate: predicate.into(), object }
    }
}

#[derive(Debug, Error)]
pub enum TurtleError {
    #[error("turtle parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out
}

fn term_text(t: &Term, prefixes: &BTreeMap<String, String>) -> String {
    match t {
        Term::Iri(iri) => iri_text(iri, prefixes),
        Term::Literal(s) => format!("\"{}\"", escape_literal(s)),
    }
}

fn iri_text(iri: &str, prefixes: &BTreeMap<String, String>) -> String {
    for (prefix, base) in prefixes {
        if let Some(local) = iri.strip_prefix(base.as_str()) {
            if is_plain_local(local) {
                return format!("{prefix}:{local}");
            }
        }
    }
    format!("<{iri}>")
}

fn is_plain_local(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        && !s.starts_with('-')
}

/// Canonical Turtle text for a triple set.
pub fn serialize_turtle(triples: &BTreeSet<Triple>, prefixes: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (prefix, base) in prefixes {
        out.push_str(&format!("@prefix {prefix}: <{base}> .\n"));
    }
    if !prefixes.is_empty() && !triples.is_empty() {
        out.push('\n');
    }
    // group: subject -> predicate -> objects; rdf:type sorts first within a
    // subject block, remaining predicates by IRI
    let mut by_subject: BTreeMap<&str, BTreeMap<(bool, &str), BTreeSet<&Term>>> = BTreeMap::new();
    for t in triples {
        by_subject
            .entry(&t.subject)
            .or_default()
            .entry((t.predicate != RDF_TYPE, &t.predicate))
            .or_default()
            .insert(&t.object);
    }
    for (subject, preds) in &by_subject {
        out.push_str(&iri_text(subject, prefixes));
        let mut first_pred = true;
        for ((_, pred), objects) in preds {
            if first_pred {
                out.push(' ');
                first_pred = false;
            } else {
                out.push_str(" ;\n    ");
            }
            if *pred == RDF_TYPE {
                out.push('a');
            } else {
                out.push_str(&iri_text(pred, prefixes));
            }
            let objs: Vec<String> = objects.iter().map(|o| term_text(o, prefixes)).collect();
            out.push(' ');
            out.push_str(&objs.join(", "));
        }
        out.push_str(" .\n");
    }
    out
}

struct Lexer<'a> {
    input: &'a str,
    pos: usize,
    line: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Iri(String),
    Prefixed(String, String),
    Literal(String),
    A,
    Dot,
    Semicolon,
    Comma,
    PrefixDirective,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl<'a> Lexer<'a> {
    fn new(input: &'a str) -> Self {
        Lexer { input, pos: 0, line: 1 }
    }

    fn error(&self, message: impl Into<String>) -> TurtleError {
        TurtleError::Parse { line: self.line, message: message.into() }
    }

    fn peek_char(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek_char() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, TurtleError> {
        self.skip_ws();
        let Some(c) = self.peek_char() else {
            return Ok(Token::Eof);
        };
        match c {
            '<' => {
                self.bump();
                let start = self.pos;
                while let Some(c) = self.peek_char() {
                    if c == '>' {
                        let iri = self.input[start..self.pos].to_string();
                        self.bump();
                        return Ok(Token::Iri(iri));
                    }
                    self.bump();
                }
                Err(self.error("unterminated IRI"))
            }
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error("unterminated literal")),
                        Some('"') => return Ok(Token::Literal(s)),
                        Some('\\') => match self.bump() {
                            Some('\\') => s.push('\\'),
                            Some('"') => s.push('"'),
                            Some('n') => s.push('\n'),
                            Some('r') => s.push('\r'),
                            Some('t') => s.push('\t'),
                            other => {
                                return Err(self.error(format!("bad escape {other:?}")));
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
            }
            '.' => {
                self.bump();
                Ok(Token::Dot)
            }
            ';' => {
                self.bump();
                Ok(Token::Semicolon)
            }
            ',' => {
                self.bump();
                Ok(Token::Comma)
            }
            '@' => {
                self.bump();
                let word = self.take_word();
                if word == "prefix" {
                    Ok(Token::PrefixDirective)
                } else {
                    Err(self.error(format!("unsupported directive @{word}")))
                }
            }
            _ => {
                let word = self.take_name();
                if word.is_empty() {
                    return Err(self.error(format!("unexpected character {c:?}")));
                }
                if word == "a" {
                    return Ok(Token::A);
                }
                if let Some(colon) = word.find(':') {
                    return Ok(Token::Prefixed(
                        word[..colon].to_string(),
                        word[colon + 1..].to_string(),
                    ));
                }
                Err(self.error(format!("unexpected token {word:?}")))
            }
        }
    }

    fn take_word(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.bump();
            } else {
                break;
            }
        }
        self.input[start..self.pos].to_string()
    }

    fn take_name(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == ':' {
                self.bump();
            } else {
                break;
            }
        }
        self.input[start..self.pos].to_string()
    }
}

/// Parse the canonical subset back into a triple set.
pub fn parse_turtle(input: &str) -> Result<BTreeSet<Triple>, TurtleError> {
    let mut lex = Lexer::new(input);
    let mut prefixes: BTreeMap<String, String> = BTreeMap::new();
    let mut triples = BTreeSet::new();

    let resolve = |tok: &Token, prefixes: &BTreeMap<String, String>, lex: &Lexer| -> Result<String, TurtleError> {
        match tok {
            Token::Iri(i) => Ok(i.clone()),
            Token::Prefixed(p, local) => prefixes
                .get(p)
                .map(|base| format!("{base}{local}"))
                .ok_or_else(|| lex.error(format!("unknown prefix {p:?}"))),
            other => Err(lex.error(format!("expected IRI, found {other}"))),
        }
    };

    loop {
        let tok = lex.next_token()?;
        match tok {
            Token::Eof => return Ok(triples),
            Token::PrefixDirective => {
                let name = match lex.next_token()? {
                    Token::Prefixed(p, local) if local.is_empty() => p,
                    other => return Err(lex.error(format!("expected prefix name, found {other}"))),
                };
                let base = match lex.next_token()? {
                    Token::Iri(i) => i,
                    other => return Err(lex.error(format!("expected IRI, found {other}"))),
                };
                if lex.next_token()? != Token::Dot {
                    return Err(lex.error("expected '.' after @prefix"));
                }
                prefixes.insert(name, base);
            }
            subject_tok => {
                let subject = resolve(&subject_tok, &prefixes, &lex)?;
                'predicates: loop {
                    let pred_tok = lex.next_token()?;
                    let predicate = if pred_tok == Token::A {
                        RDF_TYPE.to_string()
                    } else {
                        resolve(&pred_tok, &prefixes, &lex)?
                    };
                    loop {
                        let obj_tok = lex.next_token()?;
                        let object = match &obj_tok {
                            Token::Literal(s) => Term::Literal(s.clone()),
                            _ => Term::Iri(resolve(&obj_tok, &prefixes, &lex)?),
                        };
                        triples.insert(Triple::new(subject.clone(), predicate.clone(), object));
                        match lex.next_token()? {
                            Token::Comma => continue,
                            Token::Semicolon => break,
                            Token::Dot => break 'predicates,
                            other => {
                                return Err(lex.error(format!(
                                    "expected ',', ';' or '.', found {other}"
                                )))
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefixes() -> BTreeMap<String, String> {
        [("do".to_string(), "http://example.org/doconto#".to_string())]
            .into_iter()
            .collect()
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let mut triples = BTreeSet::new();
        triples.insert(Triple::new(
            "http://example.org/doconto#Approach",
            RDF_TYPE,
            Term::iri("http://www.w3.org/2002/07/owl#Class"),
        ));
        triples.insert(Triple::new(
            "http://example.org/doconto#Approach",
            "http://www.w3.org/2000/01/rdf-schema#label",
            Term::literal("Approach \"quoted\"\nnext"),
        ));
        let mut p = prefixes();
        p.insert("owl".into(), "http://www.w3.org/2002/07/owl#".into());
        let text = serialize_turtle(&triples, &p);
        let parsed = parse_turtle(&text).unwrap();
        assert_eq!(parsed, triples);
        assert_eq!(serialize_turtle(&parsed, &p), text);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_turtle("do:A ???").is_err());
    }

    #[test]
    fn unknown_prefix_rejected() {
        assert!(parse_turtle("zz:A a zz:B .").is_err());
    }
}
