//! Train both autoencoders on the bundled corpus and embed the unique
//! headers with the VAE bottleneck.
//!
//! ```bash
//! cargo run --release -p doconto --example train_and_embed
//! ```

use std::collections::BTreeSet;

use doconto::corpus::{header_records, read_corpus_collect, tokenize, HeaderLevel, HeaderRecord, ReadKind};
use doconto::encoder::{
    build_vocabulary, encode_header, train_cae, train_vae, Autoencoder, OptimizerKind, TrainConfig,
};

fn main() {
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy.jsonl");
    let (docs, _) = read_corpus_collect(corpus, ReadKind::HeadersOnly).unwrap();
    let (records, _) = header_records(&docs);
    let vocab = build_vocabulary(&records, 200, 1);
    println!("{} headers, vocabulary of {} tokens", records.len(), vocab.size());

    let cfg = TrainConfig {
        seq_len: 6,
        embed_dim: 16,
        hidden_dim: 32,
        latent_dim: 8,
        batch_size: 32,
        epochs: 40,
        learning_rate: 1e-3,
        optimizer: OptimizerKind::RmsProp,
        seed: 7,
        ..TrainConfig::default()
    };
    let encoded: Vec<_> = records
        .iter()
        .map(|r| encode_header(r, &vocab, cfg.seq_len))
        .collect();

    let (vae, vae_hist) = train_vae(&encoded, vocab.size(), &cfg).unwrap();
    let (_cae, cae_hist) = train_cae(&encoded, vocab.size(), &cfg).unwrap();
    for (v, c) in vae_hist.iter().zip(&cae_hist).step_by(10) {
        println!(
            "epoch {:>3}  vae val {:>8.3}  cae val {:>8.3}",
            v.epoch, v.val_total, c.val_total
        );
    }

    // one embedding row per unique normalized header
    let unique: BTreeSet<&str> = records.iter().map(|r| r.normalized.as_str()).collect();
    let labels: Vec<String> = unique.into_iter().map(str::to_string).collect();
    let enc: Vec<_> = labels
        .iter()
        .map(|l| HeaderRecord {
            doc_id: String::new(),
            level: HeaderLevel::Top,
            normalized: l.clone(),
            tokens: tokenize(l),
        })
        .map(|r| encode_header(&r, &vocab, cfg.seq_len))
        .collect();
    let em = Autoencoder::Vae(vae).embed_headers(&enc, &labels);
    println!("\n{} x {} embedding; first rows:", em.len(), em.dim);
    for i in 0..3.min(em.len()) {
        let row: Vec<String> = em.row(i).iter().map(|v| format!("{v:+.3}")).collect();
        println!("  {:<24} [{}]", em.labels[i], row.join(", "));
    }
}
