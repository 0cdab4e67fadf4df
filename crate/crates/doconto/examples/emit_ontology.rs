//! Build the base ontology, map a few header surface forms to classes,
//! annotate one document and print the resulting Turtle.
//!
//! ```bash
//! cargo run -p doconto --example emit_ontology
//! ```

use doconto::corpus::{DocType, DocumentRecord, HeaderLevel, RawHeader, SectionText};
use doconto::ontology::{
    annotate_document, build_base_ontology, default_aliases, emit_turtle, map_header_to_class,
    AnnotationContext, OntologyScope,
};

fn main() {
    let graph = build_base_ontology(OntologyScope::Both);
    println!(
        "{} classes total, {} concept classes under Section",
        graph.classes().count(),
        graph.concept_classes().len()
    );

    let aliases = default_aliases();
    for header in ["conclusion", "methods", "results and discussion", "unheard of"] {
        match map_header_to_class(header, &graph, &aliases, None) {
            Some((class, method)) => println!("{header:>24} -> {class} ({method:?})"),
            None => println!("{header:>24} -> (unmapped)"),
        }
    }

    let header = |text: &str| RawHeader { text: text.to_string(), level: HeaderLevel::Top };
    let doc = DocumentRecord {
        doc_id: "demo-1".into(),
        doc_type: DocType::Academic,
        category: Some("machine learning".into()),
        headers: vec![header("Introduction"), header("Methods"), header("Conclusion")],
        sections: Some(vec![SectionText {
            header: header("Introduction"),
            body: "We study header ontologies.".into(),
        }]),
    };
    let ctx = AnnotationContext {
        aliases: &aliases,
        embedding: None,
        topic_model: None,
        k_terms: 5,
        inference_sweeps: 20,
        content_byte_limit: 2048,
    };
    let annotated = annotate_document(&doc, &graph, &ctx).unwrap();

    println!("\n{}", emit_turtle(&graph, &[annotated]));
}
