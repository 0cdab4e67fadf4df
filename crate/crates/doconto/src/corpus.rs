//! Corpus ingestion: JSONL document reading, header normalization, tokenization.
//!
//! One document per line. Each line is a JSON object:
//!
//! ```json
//! {"doc_id": "...", "doc_type": "academic", "category": "cs.AI",
//!  "headers": [{"level": "top", "text": "1. Introduction"}],
//!  "sections": [{"header": {...}, "body": "..."}]}
//! ```
//!
//! `sections` may be absent when reading headers only.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Academic,
    Rfp,
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocType::Academic => write!(f, "academic"),
            DocType::Rfp => write!(f, "rfp"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderLevel {
    Top,
    Subsection,
    Subsubsection,
}

/// A section header as it appears in the source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub level: HeaderLevel,
    pub text: String,
}

/// A section header paired with its textual content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionText {
    pub header: RawHeader,
    #[serde(default)]
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub doc_type: DocType,
    #[serde(default)]
    pub category: Option<String>,
    pub headers: Vec<RawHeader>,
    #[serde(default)]
    pub sections: Option<Vec<SectionText>>,
}

/// A normalized header ready for counting and encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderRecord {
    pub doc_id: String,
    pub level: HeaderLevel,
    pub normalized: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadKind {
    HeadersOnly,
    Full,
}

/// A per-line schema problem. The read continues past it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Streaming corpus reader. Yields documents and per-line diagnostics in
/// file order; malformed lines never abort the run.
pub struct CorpusReader {
    lines: std::io::Lines<BufReader<File>>,
    kind: ReadKind,
    line_no: usize,
    seen_ids: std::collections::HashSet<String>,
}

impl Iterator for CorpusReader {
    type Item = Result<DocumentRecord, Diagnostic>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.line_no += 1;
                    return Some(Err(Diagnostic {
                        line: self.line_no,
                        message: format!("unreadable line: {e}"),
                    }));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse_line(&line));
        }
    }
}

impl CorpusReader {
    fn parse_line(&mut self, line: &str) -> Result<DocumentRecord, Diagnostic> {
        let diag = |msg: String| Diagnostic {
            line: self.line_no,
            message: msg,
        };
        let mut doc: DocumentRecord =
            serde_json::from_str(line).map_err(|e| diag(format!("invalid JSON: {e}")))?;
        if doc.doc_id.is_empty() {
            return Err(diag("empty doc_id".into()));
        }
        if !self.seen_ids.insert(doc.doc_id.clone()) {
            return Err(diag(format!("duplicate doc_id {:?}", doc.doc_id)));
        }
        for h in &doc.headers {
            if h.text.trim().is_empty() {
                return Err(diag("header text empty after trimming".into()));
            }
        }
        match self.kind {
            ReadKind::HeadersOnly => doc.sections = None,
            ReadKind::Full => {
                if doc.sections.is_none() {
                    return Err(diag("missing \"sections\" (required for full read)".into()));
                }
            }
        }
        Ok(doc)
    }
}

/// Open `path` as a JSONL corpus for streaming.
pub fn read_corpus<P: AsRef<Path>>(path: P, kind: ReadKind) -> Result<CorpusReader, CorpusError> {
    let p = path.as_ref();
    let file = File::open(p).map_err(|source| CorpusError::Io {
        path: p.display().to_string(),
        source,
    })?;
    Ok(CorpusReader {
        lines: BufReader::new(file).lines(),
        kind,
        line_no: 0,
        seen_ids: std::collections::HashSet::new(),
    })
}

/// Read the whole corpus into memory, separating records from diagnostics.
pub fn read_corpus_collect<P: AsRef<Path>>(
    path: P,
    kind: ReadKind,
) -> Result<(Vec<DocumentRecord>, Vec<Diagnostic>), CorpusError> {
    let mut docs = Vec::new();
    let mut diags = Vec::new();
    for item in read_corpus(path, kind)? {
        match item {
            Ok(d) => docs.push(d),
            Err(d) => diags.push(d),
        }
    }
    Ok((docs, diags))
}

/// Strip leading digits, dots and whitespace, lowercase, collapse inner
/// whitespace, trim. Idempotent.
pub fn normalize_header(raw: &str) -> String {
    let stripped = raw.trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c.is_whitespace());
    let lower = stripped.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    let mut last_space = false;
    for c in lower.trim().chars() {
        if c.is_whitespace() {
            if !last_space {
                out.push(' ');
            }
            last_space = true;
        } else {
            out.push(c);
            last_space = false;
        }
    }
    out
}

/// Whitespace split with surrounding punctuation stripped per token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Turn a document's raw headers into normalized records, dropping any that
/// normalize to the empty string. Returns the records and the dropped count.
pub fn header_records(docs: &[DocumentRecord]) -> (Vec<HeaderRecord>, usize) {
    let mut out = Vec::new();
    let mut dropped = 0;
    for doc in docs {
        for raw in &doc.headers {
            let normalized = normalize_header(&raw.text);
            if normalized.is_empty() {
                dropped += 1;
                continue;
            }
            let tokens = tokenize(&normalized);
            out.push(HeaderRecord {
                doc_id: doc.doc_id.clone(),
                level: raw.level,
                normalized,
                tokens,
            });
        }
    }
    (out, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    const VALID: &str = r#"{"doc_id":"d1","doc_type":"academic","category":"cs.AI","headers":[{"level":"top","text":"1. Introduction"}],"sections":[{"header":{"level":"top","text":"1. Introduction"},"body":"hello"}]}"#;
    const VALID2: &str = r#"{"doc_id":"d2","doc_type":"rfp","category":null,"headers":[{"level":"top","text":"Statement of Work"}],"sections":[]}"#;

    #[test]
    fn two_valid_lines() {
        let f = write_lines(&[VALID, VALID2]);
        let (docs, diags) = read_corpus_collect(f.path(), ReadKind::Full).unwrap();
        assert_eq!(docs.len(), 2);
        assert!(diags.is_empty());
        assert_eq!(docs[0].doc_id, "d1");
        assert_eq!(docs[1].doc_type, DocType::Rfp);
    }

    #[test]
    fn empty_file() {
        let f = write_lines(&[]);
        let (docs, diags) = read_corpus_collect(f.path(), ReadKind::Full).unwrap();
        assert!(docs.is_empty());
        assert!(diags.is_empty());
    }

    #[test]
    fn malformed_line_reported_with_number() {
        let f = write_lines(&[VALID, "{not json"]);
        let (docs, diags) = read_corpus_collect(f.path(), ReadKind::Full).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 2);
    }

    #[test]
    fn missing_file_is_fatal() {
        assert!(read_corpus("/nonexistent/corpus.jsonl", ReadKind::Full).is_err());
    }

    #[test]
    fn headers_only_agrees_with_full() {
        let f = write_lines(&[VALID, VALID2]);
        let (full, _) = read_corpus_collect(f.path(), ReadKind::Full).unwrap();
        let (ho, _) = read_corpus_collect(f.path(), ReadKind::HeadersOnly).unwrap();
        for (a, b) in full.iter().zip(&ho) {
            assert_eq!(a.doc_id, b.doc_id);
            assert_eq!(a.doc_type, b.doc_type);
            assert_eq!(a.headers, b.headers);
            assert!(b.sections.is_none());
        }
    }

    #[test]
    fn full_requires_sections() {
        let no_sections = r#"{"doc_id":"d3","doc_type":"academic","headers":[]}"#;
        let f = write_lines(&[no_sections]);
        let (docs, diags) = read_corpus_collect(f.path(), ReadKind::Full).unwrap();
        assert!(docs.is_empty());
        assert_eq!(diags.len(), 1);
        let (docs, diags) = read_corpus_collect(f.path(), ReadKind::HeadersOnly).unwrap();
        assert_eq!(docs.len(), 1);
        assert!(diags.is_empty());
    }

    #[test]
    fn normalize_strips_enumeration() {
        assert_eq!(normalize_header("1.2. Introduction"), "introduction");
        assert_eq!(normalize_header("  3 Related   Work"), "related work");
        assert_eq!(normalize_header("Conclusion"), "conclusion");
        assert_eq!(normalize_header("3.1.4"), "");
    }

    #[test]
    fn normalize_keeps_roman_numerals() {
        assert_eq!(normalize_header("IV. Results"), "iv. results");
    }

    #[test]
    fn tokenize_basics() {
        assert_eq!(tokenize("proof of theorem"), ["proof", "of", "theorem"]);
        assert_eq!(tokenize("results, and discussion"), ["results", "and", "discussion"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn empty_normalized_headers_dropped() {
        let doc = DocumentRecord {
            doc_id: "d".into(),
            doc_type: DocType::Academic,
            category: None,
            headers: vec![
                RawHeader { level: HeaderLevel::Top, text: "1.".into() },
                RawHeader { level: HeaderLevel::Top, text: "2. Methods".into() },
            ],
            sections: None,
        };
        let (recs, dropped) = header_records(&[doc]);
        assert_eq!(recs.len(), 1);
        assert_eq!(dropped, 1);
        assert_eq!(recs[0].normalized, "methods");
        assert_eq!(recs[0].tokens, ["methods"]);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_idempotent(s in ".{0,64}") {
                let once = normalize_header(&s);
                prop_assert_eq!(normalize_header(&once), once);
            }

            #[test]
            fn normalize_never_starts_with_digit_or_dot(s in ".{0,64}") {
                let n = normalize_header(&s);
                if let Some(c) = n.chars().next() {
                    prop_assert!(!c.is_ascii_digit() && c != '.');
                }
            }

            #[test]
            fn tokenize_fixpoint(s in "[a-z ,.!]{0,64}") {
                let toks = tokenize(&s);
                prop_assert!(toks.iter().all(|t| !t.is_empty()));
                let joined = toks.join(" ");
                prop_assert_eq!(tokenize(&joined), toks);
            }
        }
    }
}
