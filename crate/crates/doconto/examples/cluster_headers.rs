//! t-SNE + k-means over synthetic header embeddings, with cluster
//! summaries and closest-concept pairs.
//!
//! ```bash
//! cargo run -p doconto --example cluster_headers
//! ```

use doconto::corpus::{header_records, read_corpus_collect, ReadKind};
use doconto::encoder::EmbeddingMatrix;
use doconto::headcount::count_headers;
use doconto::manifold::{
    kmeans, silhouette, similar_concepts, summarize_clusters, tsne, TsneConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn main() {
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy.jsonl");
    let (docs, _) = read_corpus_collect(corpus, ReadKind::HeadersOnly).unwrap();
    let (records, _) = header_records(&docs);
    let labels: Vec<String> = records
        .iter()
        .map(|r| r.normalized.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // synthetic 8-d embedding standing in for a trained bottleneck: three
    // loose groups plus noise, deterministic
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 8;
    let data: Vec<f64> = labels
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            let center = (i % 3) as f64 * 6.0;
            (0..dim)
                .map(|_| center + rng.gen_range(-0.5..0.5))
                .collect::<Vec<_>>()
        })
        .collect();
    let em = EmbeddingMatrix::new(labels, dim, data);

    let cfg = TsneConfig { perplexity: 5.0, iterations: 400, seed: 7, ..TsneConfig::default() };
    let r = tsne(&em, &cfg).unwrap();
    println!("t-SNE KL: {:.4} after exaggeration, {:.4} final", r.kl_after_exaggeration, r.kl_final);

    let points: Vec<Vec<f64>> = (0..em.len()).map(|i| em.row(i).to_vec()).collect();
    let assign = kmeans(&points, 3, 7, 100).unwrap();
    println!(
        "k-means inertia {:.3}, silhouette {:.3}",
        assign.inertia,
        silhouette(&points, &assign.labels, 3)
    );

    let freq = count_headers(&records);
    let summaries = summarize_clusters(&assign, &points, &em.labels, &freq, 3);
    for s in &summaries {
        let tops: Vec<&str> = s.top_headers.iter().map(|(h, _)| h.as_str()).collect();
        println!("cluster {} ({} members), medoid {:?}: {}", s.cluster, s.size, s.medoid, tops.join(", "));
    }
    for p in similar_concepts(&summaries, &assign.centroids, 2) {
        println!("closest concepts: {} <-> {} (distance {:.3})", p.label_a, p.label_b, p.distance);
    }
}
