//! The document ontology: classes for academic articles and RFPs, their
//! properties and links, document annotation, and Turtle emission.

mod turtle;

pub use turtle::{parse_turtle, serialize_turtle, Term, Triple, TurtleError, RDF_TYPE};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{normalize_header, DocType, DocumentRecord};
use crate::encoder::EmbeddingMatrix;
use crate::manifold::ClusterAssignment;
use crate::topics::{semantic_terms, TopicModel};

pub const DEFAULT_BASE_IRI: &str = "http://example.org/doconto#";
pub const DEFAULT_CONTENT_BYTE_LIMIT: usize = 2048;

const OWL: &str = "http://www.w3.org/2002/07/owl#";
const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

/// Concept classes for academic articles, in table order (used for
/// multi-match resolution).
pub const ACADEMIC_CLASSES: [&str; 20] = [
    "Introduction", "Conclusion", "Discussion", "References", "Acknowledgments",
    "Results", "Abstract", "Appendix", "Related Work", "Experiments",
    "Methodology", "Proof of Theorem", "Evaluation", "Future Work", "Datasets",
    "Contribution", "Background", "Implementation", "Approach", "Preliminary",
];

/// Concept classes for RFPs, in table order.
pub const RFP_CLASSES: [&str; 10] = [
    "Introduction", "Requirement", "General Information", "Conclusion",
    "Statement of Work", "Contract Administration", "Appendix", "Background",
    "Deliverable", "Contract Clauses",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OntologyScope {
    Academic,
    Rfp,
    Both,
}

impl std::str::FromStr for OntologyScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "academic" => Ok(OntologyScope::Academic),
            "rfp" => Ok(OntologyScope::Rfp),
            "both" => Ok(OntologyScope::Both),
            other => Err(format!("unknown scope {other:?} (expected academic|rfp|both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyClass {
    pub id: String,
    pub label: String,
    pub parent: Option<String>,
    pub doc_types: BTreeSet<DocType>,
    /// true for Document/AcademicArticle/RFP/Section scaffolding
    pub structural: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PropertyKind {
    HasContent,
    HasSemanticTerms,
    HasPart,
    IsSimilarTo,
    HasCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropertyRange {
    Class(String),
    LiteralString,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyProperty {
    pub id: String,
    pub kind: PropertyKind,
    pub domain: String,
    pub range: PropertyRange,
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("class {0:?} not present in the graph")]
    UnknownClass(String),
    #[error("adding {child:?} under {parent:?} would create a cycle")]
    Cycle { child: String, parent: String },
    #[error("class id {0:?} already present")]
    Duplicate(String),
    #[error("document type {doc_type} is not covered by this ontology graph")]
    DocTypeNotInGraph { doc_type: DocType },
    #[error(transparent)]
    Turtle(#[from] TurtleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyGraph {
    pub base_iri: String,
    classes: BTreeMap<String, OntologyClass>,
    properties: Vec<OntologyProperty>,
    /// (whole, part) class links
    part_of: BTreeSet<(String, String)>,
    /// canonicalized unordered pairs, a < b
    similar: BTreeSet<(String, String)>,
    /// catalog resolution order of concept class ids
    table_order: Vec<String>,
}

/// UpperCamelCase class id from a table label.
pub fn class_id(label: &str) -> String {
    label
        .split_whitespace()
        .map(|w| {
            let mut cs = w.chars();
            match cs.next() {
                Some(c) => c.to_uppercase().collect::<String>() + cs.as_str(),
                None => String::new(),
            }
        })
        .collect()
}

impl OntologyGraph {
    fn empty(base_iri: &str) -> Self {
        OntologyGraph {
            base_iri: base_iri.to_string(),
            classes: BTreeMap::new(),
            properties: Vec::new(),
            part_of: BTreeSet::new(),
            similar: BTreeSet::new(),
            table_order: Vec::new(),
        }
    }

    pub fn add_class(
        &mut self,
        id: &str,
        label: &str,
        parent: Option<&str>,
        doc_types: BTreeSet<DocType>,
        structural: bool,
    ) -> Result<(), OntologyError> {
        if self.classes.contains_key(id) {
            return Err(OntologyError::Duplicate(id.to_string()));
        }
        if let Some(p) = parent {
            if !self.classes.contains_key(p) {
                return Err(OntologyError::UnknownClass(p.to_string()));
            }
            // walking up from the parent must terminate without meeting id
            let mut cur = Some(p.to_string());
            while let Some(c) = cur {
                if c == id {
                    return Err(OntologyError::Cycle {
                        child: id.to_string(),
                        parent: p.to_string(),
                    });
                }
                cur = self.classes.get(&c).and_then(|k| k.parent.clone());
            }
        }
        self.classes.insert(
            id.to_string(),
            OntologyClass {
                id: id.to_string(),
                label: label.to_string(),
                parent: parent.map(|s| s.to_string()),
                doc_types,
                structural,
            },
        );
        Ok(())
    }

    fn require_class(&self, id: &str) -> Result<(), OntologyError> {
        if self.classes.contains_key(id) {
            Ok(())
        } else {
            Err(OntologyError::UnknownClass(id.to_string()))
        }
    }

    pub fn add_part(&mut self, whole: &str, part: &str) -> Result<(), OntologyError> {
        self.require_class(whole)?;
        self.require_class(part)?;
        self.part_of.insert((whole.to_string(), part.to_string()));
        Ok(())
    }

    pub fn add_similar(&mut self, a: &str, b: &str) -> Result<(), OntologyError> {
        self.require_class(a)?;
        self.require_class(b)?;
        let pair = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.similar.insert(pair);
        Ok(())
    }

    pub fn class(&self, id: &str) -> Option<&OntologyClass> {
        self.classes.get(id)
    }

    pub fn classes(&self) -> impl Iterator<Item = &OntologyClass> {
        self.classes.values()
    }

    /// Catalog concept classes only (structural scaffolding excluded).
    pub fn concept_classes(&self) -> Vec<&OntologyClass> {
        self.table_order
            .iter()
            .map(|id| &self.classes[id])
            .collect()
    }

    pub fn has_doc_type(&self, dt: DocType) -> bool {
        self.classes
            .values()
            .any(|c| !c.structural && c.doc_types.contains(&dt))
    }

    /// Symmetric similarity lookup: classes linked to `id` from either side.
    pub fn similar_to(&self, id: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .similar
            .iter()
            .filter_map(|(a, b)| {
                if a == id {
                    Some(b.as_str())
                } else if b == id {
                    Some(a.as_str())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn parts_of(&self, whole: &str) -> Vec<&str> {
        self.part_of
            .iter()
            .filter(|(w, _)| w == whole)
            .map(|(_, p)| p.as_str())
            .collect()
    }

    fn iri(&self, local: &str) -> String {
        format!("{}{}", self.base_iri, local)
    }
}

/// The fixed upper-level graph plus the catalog concept classes for the
/// requested scope. `Results hasPart Experiments` and
/// `Approach isSimilarTo Methodology` are preinstalled when both ends exist.
pub fn build_base_ontology(scope: OntologyScope) -> OntologyGraph {
    build_base_ontology_with_iri(scope, DEFAULT_BASE_IRI)
}

pub fn build_base_ontology_with_iri(scope: OntologyScope, base_iri: &str) -> OntologyGraph {
    let mut g = OntologyGraph::empty(base_iri);
    let both: BTreeSet<DocType> = [DocType::Academic, DocType::Rfp].into_iter().collect();
    g.add_class("Document", "Document", None, both.clone(), true).unwrap();
    g.add_class("AcademicArticle", "Academic Article", Some("Document"),
        [DocType::Academic].into_iter().collect(), true).unwrap();
    g.add_class("RFP", "RFP", Some("Document"),
        [DocType::Rfp].into_iter().collect(), true).unwrap();
    g.add_class("Section", "Section", Some("Document"), both, true).unwrap();

    let push = |g: &mut OntologyGraph, label: &str, dt: DocType| {
        let id = class_id(label);
        match g.classes.get_mut(&id) {
            Some(existing) => {
                existing.doc_types.insert(dt);
            }
            None => {
                g.add_class(&id, label, Some("Section"), [dt].into_iter().collect(), false)
                    .unwrap();
                g.table_order.push(id);
            }
        }
    };
    if matches!(scope, OntologyScope::Academic | OntologyScope::Both) {
        for label in ACADEMIC_CLASSES {
            push(&mut g, label, DocType::Academic);
        }
    }
    if matches!(scope, OntologyScope::Rfp | OntologyScope::Both) {
        for label in RFP_CLASSES {
            push(&mut g, label, DocType::Rfp);
        }
    }

    g.properties = vec![
        OntologyProperty {
            id: "hasContent".into(),
            kind: PropertyKind::HasContent,
            domain: "Section".into(),
            range: PropertyRange::LiteralString,
        },
        OntologyProperty {
            id: "hasSemanticTerms".into(),
            kind: PropertyKind::HasSemanticTerms,
            domain: "Section".into(),
            range: PropertyRange::LiteralString,
        },
        OntologyProperty {
            id: "hasPart".into(),
            kind: PropertyKind::HasPart,
            domain: "Document".into(),
            range: PropertyRange::Class("Section".into()),
        },
        OntologyProperty {
            id: "isSimilarTo".into(),
            kind: PropertyKind::IsSimilarTo,
            domain: "Section".into(),
            range: PropertyRange::Class("Section".into()),
        },
        OntologyProperty {
            id: "hasCategory".into(),
            kind: PropertyKind::HasCategory,
            domain: "Document".into(),
            range: PropertyRange::LiteralString,
        },
    ];

    if g.classes.contains_key("Results") && g.classes.contains_key("Experiments") {
        g.add_part("Results", "Experiments").unwrap();
    }
    if g.classes.contains_key("Approach") && g.classes.contains_key("Methodology") {
        g.add_similar("Approach", "Methodology").unwrap();
    }
    g
}

/// Default header-surface -> class aliases; shipped as an editable TSV.
pub fn default_aliases() -> BTreeMap<String, String> {
    [
        ("acknowledgements", "Acknowledgments"),
        ("acknowledgment", "Acknowledgments"),
        ("related works", "Related Work"),
        ("bibliography", "References"),
        ("methods", "Methodology"),
        ("method", "Methodology"),
        ("future works", "Future Work"),
        ("preliminaries", "Preliminary"),
        ("dataset", "Datasets"),
        ("experiment", "Experiments"),
        ("summary", "Conclusion"),
    ]
    .into_iter()
    .map(|(s, label)| (s.to_string(), class_id(label)))
    .collect()
}

pub fn write_aliases_tsv<W: std::io::Write>(
    w: &mut W,
    aliases: &BTreeMap<String, String>,
) -> std::io::Result<()> {
    for (surface, class) in aliases {
        writeln!(w, "{surface}\t{class}")?;
    }
    Ok(())
}

pub fn read_aliases_tsv<R: std::io::BufRead>(
    r: R,
) -> Result<BTreeMap<String, String>, std::io::Error> {
    let mut out = BTreeMap::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((surface, class)) = line.split_once('\t') {
            out.insert(surface.to_string(), class.to_string());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Exact,
    Alias,
    Embedding,
}

/// Cluster-based fallback mapping: header label -> cluster -> class.
#[derive(Debug, Clone)]
pub struct EmbeddingMapping {
    label_to_cluster: HashMap<String, usize>,
    cluster_to_class: HashMap<usize, String>,
}

impl EmbeddingMapping {
    pub fn new(
        em: &EmbeddingMatrix,
        assign: &ClusterAssignment,
        cluster_to_class: HashMap<usize, String>,
    ) -> Self {
        assert_eq!(em.len(), assign.labels.len());
        let label_to_cluster = em
            .labels
            .iter()
            .cloned()
            .zip(assign.labels.iter().copied())
            .collect();
        EmbeddingMapping { label_to_cluster, cluster_to_class }
    }

    fn lookup(&self, header: &str) -> Option<&str> {
        let cluster = self.label_to_cluster.get(header)?;
        self.cluster_to_class.get(cluster).map(|s| s.as_str())
    }
}

/// Resolution order: exact label match, alias table, label containment
/// (first class in table order wins), then the embedding-cluster map.
pub fn map_header_to_class(
    header: &str,
    graph: &OntologyGraph,
    aliases: &BTreeMap<String, String>,
    embeddings: Option<&EmbeddingMapping>,
) -> Option<(String, MatchMethod)> {
    for c in graph.concept_classes() {
        if c.label.to_lowercase() == header {
            return Some((c.id.clone(), MatchMethod::Exact));
        }
    }
    if let Some(class) = aliases.get(header) {
        if graph.class(class).is_some() {
            return Some((class.clone(), MatchMethod::Alias));
        }
    }
    // multi-word headers containing a class label resolve to the first
    // match in table order
    let header_tokens: Vec<&str> = header.split_whitespace().collect();
    for id in &graph.table_order {
        let label = graph.classes[id].label.to_lowercase();
        let label_tokens: Vec<&str> = label.split_whitespace().collect();
        if label_tokens.len() < header_tokens.len()
            && header_tokens
                .windows(label_tokens.len())
                .any(|w| w == label_tokens.as_slice())
        {
            return Some((id.clone(), MatchMethod::Exact));
        }
    }
    if let Some(em) = embeddings {
        if let Some(class) = em.lookup(header) {
            if graph.class(class).is_some() {
                return Some((class.to_string(), MatchMethod::Embedding));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionAnnotation {
    pub ordinal: usize,
    pub class_id: Option<String>,
    pub method: Option<MatchMethod>,
    pub semantic_terms: Vec<String>,
    pub content_hash: String,
    /// body truncated at the configured byte limit
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub doc_type: DocType,
    pub category: Option<String>,
    pub sections: Vec<SectionAnnotation>,
}

pub struct AnnotationContext<'a> {
    pub aliases: &'a BTreeMap<String, String>,
    pub embedding: Option<&'a EmbeddingMapping>,
    pub topic_model: Option<&'a TopicModel>,
    pub k_terms: usize,
    pub inference_sweeps: usize,
    pub content_byte_limit: usize,
}

impl<'a> AnnotationContext<'a> {
    pub fn new(aliases: &'a BTreeMap<String, String>) -> Self {
        AnnotationContext {
            aliases,
            embedding: None,
            topic_model: None,
            k_terms: 5,
            inference_sweeps: 20,
            content_byte_limit: DEFAULT_CONTENT_BYTE_LIMIT,
        }
    }
}

fn truncate_bytes(s: &str, limit: usize) -> &str {
    if s.len() <= limit {
        return s;
    }
    let mut end = limit;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

/// Map every section header to a class and attach semantic terms when a
/// topic model is available.
pub fn annotate_document(
    doc: &DocumentRecord,
    graph: &OntologyGraph,
    ctx: &AnnotationContext,
) -> Result<AnnotatedDocument, OntologyError> {
    if !graph.has_doc_type(doc.doc_type) {
        return Err(OntologyError::DocTypeNotInGraph { doc_type: doc.doc_type });
    }
    let mut sections = Vec::new();
    for (ordinal, section) in doc.sections.iter().flatten().enumerate() {
        let normalized = normalize_header(&section.header.text);
        let mapped = map_header_to_class(&normalized, graph, ctx.aliases, ctx.embedding);
        let (class_id, method) = match mapped {
            Some((c, m)) => (Some(c), Some(m)),
            None => (None, None),
        };
        let semantic = match ctx.topic_model {
            Some(model) => semantic_terms(model, &section.body, ctx.k_terms, ctx.inference_sweeps)
                .into_iter()
                .map(|(t, _)| t)
                .collect(),
            None => Vec::new(),
        };
        let mut hasher = Sha256::new();
        hasher.update(section.body.as_bytes());
        sections.push(SectionAnnotation {
            ordinal,
            class_id,
            method,
            semantic_terms: semantic,
            content_hash: format!("{:x}", hasher.finalize()),
            content: truncate_bytes(&section.body, ctx.content_byte_limit).to_string(),
        });
    }
    Ok(AnnotatedDocument {
        doc_id: doc.doc_id.clone(),
        doc_type: doc.doc_type,
        category: doc.category.clone(),
        sections,
    })
}

fn encode_local(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'-' | b'_' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// The full triple set for a graph plus optional annotations.
pub fn graph_triples(graph: &OntologyGraph, annotations: &[AnnotatedDocument]) -> BTreeSet<Triple> {
    let mut t = BTreeSet::new();
    let owl_class = format!("{OWL}Class");
    let rdfs_label = format!("{RDFS}label");
    let rdfs_subclass = format!("{RDFS}subClassOf");
    let rdfs_domain = format!("{RDFS}domain");
    let rdfs_range = format!("{RDFS}range");
    let xsd_string = format!("{XSD}string");

    for c in graph.classes.values() {
        let iri = graph.iri(&c.id);
        t.insert(Triple::new(&iri, RDF_TYPE, Term::iri(&owl_class)));
        t.insert(Triple::new(&iri, &rdfs_label, Term::literal(&c.label)));
        if let Some(p) = &c.parent {
            t.insert(Triple::new(&iri, &rdfs_subclass, Term::iri(graph.iri(p))));
        }
    }
    for p in &graph.properties {
        let iri = graph.iri(&p.id);
        let kind = match p.range {
            PropertyRange::Class(_) => format!("{OWL}ObjectProperty"),
            PropertyRange::LiteralString => format!("{OWL}DatatypeProperty"),
        };
        t.insert(Triple::new(&iri, RDF_TYPE, Term::iri(kind)));
        t.insert(Triple::new(&iri, &rdfs_domain, Term::iri(graph.iri(&p.domain))));
        match &p.range {
            PropertyRange::Class(c) => {
                t.insert(Triple::new(&iri, &rdfs_range, Term::iri(graph.iri(c))));
            }
            PropertyRange::LiteralString => {
                t.insert(Triple::new(&iri, &rdfs_range, Term::iri(&xsd_string)));
            }
        }
    }
    let has_part = graph.iri("hasPart");
    let is_similar = graph.iri("isSimilarTo");
    for (whole, part) in &graph.part_of {
        t.insert(Triple::new(graph.iri(whole), &has_part, Term::iri(graph.iri(part))));
    }
    for (a, b) in &graph.similar {
        t.insert(Triple::new(graph.iri(a), &is_similar, Term::iri(graph.iri(b))));
    }

    let has_content = graph.iri("hasContent");
    let has_content_hash = graph.iri("hasContentHash");
    let has_terms = graph.iri("hasSemanticTerms");
    let has_category = graph.iri("hasCategory");
    for ann in annotations {
        let doc_iri = graph.iri(&format!("doc-{}", encode_local(&ann.doc_id)));
        let doc_class = match ann.doc_type {
            DocType::Academic => "AcademicArticle",
            DocType::Rfp => "RFP",
        };
        t.insert(Triple::new(&doc_iri, RDF_TYPE, Term::iri(graph.iri(doc_class))));
        if let Some(cat) = &ann.category {
            t.insert(Triple::new(&doc_iri, &has_category, Term::literal(cat)));
        }
        for s in &ann.sections {
            let sec_iri = graph.iri(&format!(
                "doc-{}-sec-{}",
                encode_local(&ann.doc_id),
                s.ordinal
            ));
            let class = s.class_id.as_deref().unwrap_or("Section");
            t.insert(Triple::new(&sec_iri, RDF_TYPE, Term::iri(graph.iri(class))));
            t.insert(Triple::new(&doc_iri, &has_part, Term::iri(&sec_iri)));
            t.insert(Triple::new(&sec_iri, &has_content, Term::literal(&s.content)));
            t.insert(Triple::new(&sec_iri, &has_content_hash, Term::literal(&s.content_hash)));
            for term in &s.semantic_terms {
                t.insert(Triple::new(&sec_iri, &has_terms, Term::literal(term)));
            }
        }
    }
    t
}

pub fn turtle_prefixes(graph: &OntologyGraph) -> BTreeMap<String, String> {
    [
        ("do".to_string(), graph.base_iri.clone()),
        ("owl".to_string(), OWL.to_string()),
        ("rdfs".to_string(), RDFS.to_string()),
        ("xsd".to_string(), XSD.to_string()),
    ]
    .into_iter()
    .collect()
}

/// Byte-deterministic canonical Turtle for the graph and annotations.
pub fn emit_turtle(graph: &OntologyGraph, annotations: &[AnnotatedDocument]) -> String {
    serialize_turtle(&graph_triples(graph, annotations), &turtle_prefixes(graph))
}
