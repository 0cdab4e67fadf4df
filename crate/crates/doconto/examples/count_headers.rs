//! Mine candidate concepts from header frequencies in the bundled corpus.
//!
//! ```bash
//! cargo run -p doconto --example count_headers
//! ```

use doconto::corpus::{header_records, read_corpus_collect, ReadKind};
use doconto::headcount::{count_headers, select_candidates};

fn main() {
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy.jsonl");
    let (docs, diags) = read_corpus_collect(corpus, ReadKind::HeadersOnly).unwrap();
    for d in &diags {
        eprintln!("line {}: {}", d.line, d.message);
    }
    let (records, dropped) = header_records(&docs);
    println!(
        "{} documents, {} headers ({} dropped as empty)",
        docs.len(),
        records.len(),
        dropped
    );

    let table = count_headers(&records);
    for c in select_candidates(&table, 2) {
        println!("{:>3}. {:<30} x{}", c.rank, c.label, c.count);
    }
}
