//! Dimensionality reduction and clustering of header embeddings:
//! exact t-SNE to 2-D, k-means++/Lloyd clustering, and cluster summaries
//! that turn clusters into candidate ontology concepts.

mod kmeans;
mod summary;
mod tsne;

pub use kmeans::{kmeans, silhouette, ClusterAssignment};
pub use summary::{similar_concepts, summarize_clusters, ClusterSummary, ConceptSimilarityPair};
pub use tsne::{joint_probabilities, kl_divergence, tsne, PAffinities, TsneConfig, TsneResult};

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite gradient at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Format(String),
}

/// n x 2 embedding, row-aligned with the source labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowDimEmbedding {
    pub labels: Vec<String>,
    pub points: Vec<[f64; 2]>,
}

impl LowDimEmbedding {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn write_lowdim_tsv<W: Write>(w: &mut W, e: &LowDimEmbedding) -> std::io::Result<()> {
    for (label, p) in e.labels.iter().zip(&e.points) {
        writeln!(w, "{label}\t{}\t{}", p[0], p[1])?;
    }
    Ok(())
}

pub fn read_lowdim_tsv<R: BufRead>(r: R) -> Result<LowDimEmbedding, ManifoldError> {
    let mut labels = Vec::new();
    let mut points = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(ManifoldError::Format(format!("line {}: expected 3 fields", lineno + 1)));
        }
        let x = parts[1]
            .parse()
            .map_err(|e| ManifoldError::Format(format!("line {}: {e}", lineno + 1)))?;
        let y = parts[2]
            .parse()
            .map_err(|e| ManifoldError::Format(format!("line {}: {e}", lineno + 1)))?;
        labels.push(parts[0].to_string());
        points.push([x, y]);
    }
    Ok(LowDimEmbedding { labels, points })
}

pub fn write_clusters_tsv<W: Write>(
    w: &mut W,
    labels: &[String],
    assign: &ClusterAssignment,
) -> std::io::Result<()> {
    for (label, c) in labels.iter().zip(&assign.labels) {
        writeln!(w, "{label}\t{c}")?;
    }
    Ok(())
}
