//! Build an LDA term lexicon from section bodies, train a topic model and
//! print per-topic terms plus semantic terms for one section.
//!
//! ```bash
//! cargo run -p doconto --example topic_terms
//! ```

use doconto::corpus::{read_corpus, ReadKind};
use doconto::topics::{build_lexicon, semantic_terms, to_bow, train_lda, LexiconMode};

fn main() {
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy.jsonl");
    // keep only documents that carry section bodies
    let docs: Vec<_> = read_corpus(corpus, ReadKind::Full)
        .unwrap()
        .filter_map(Result::ok)
        .collect();

    let mut texts = Vec::new();
    let mut ids = Vec::new();
    for d in &docs {
        for (i, s) in d.sections.iter().flatten().enumerate() {
            texts.push(s.body.clone());
            ids.push((d.doc_id.as_str(), i));
        }
    }
    let lexicon = build_lexicon(&texts, LexiconMode::Word, 2, 0.5, 5000).unwrap();
    println!("{} sections, lexicon of {} terms", texts.len(), lexicon.size());

    let bows: Vec<_> = texts
        .iter()
        .zip(&ids)
        .map(|(t, (id, ord))| to_bow(t, &lexicon, id, *ord))
        .collect();
    let model = train_lda(&bows, &lexicon, 4, 60, 0.1, 0.01, 7).unwrap();

    for topic in 0..model.topics {
        let terms: Vec<String> = model
            .top_terms(topic, 6)
            .into_iter()
            .map(|(t, p)| format!("{t} ({p:.3})"))
            .collect();
        println!("topic {topic}: {}", terms.join(", "));
    }

    let section = &texts[0];
    let terms: Vec<String> = semantic_terms(&model, section, 5, 20)
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    println!("\nsemantic terms for {:?} section 0: {}", ids[0].0, terms.join(", "));
}
