//! Cluster summaries and concept-similarity pairs: the automated stand-in
//! for manual cluster review when choosing ontology concepts.

use serde::{Deserialize, Serialize};

use crate::headcount::FrequencyTable;

use super::kmeans::ClusterAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    /// (header, corpus frequency), sorted by (count desc, label asc)
    pub top_headers: Vec<(String, u64)>,
    /// member label nearest the centroid (ties lexicographic)
    pub medoid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSimilarityPair {
    pub label_a: String,
    pub label_b: String,
    pub distance: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One summary per nonempty cluster, ordered by cluster id.
pub fn summarize_clusters(
    assign: &ClusterAssignment,
    points: &[Vec<f64>],
    labels: &[String],
    freq: &FrequencyTable,
    m: usize,
) -> Vec<ClusterSummary> {
    assert_eq!(assign.labels.len(), labels.len(), "labels must align with assignment");
    assert_eq!(points.len(), labels.len());
    let k = assign.centroids.len();
    let mut out = Vec::new();
    for c in 0..k {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| assign.labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let mut tops: Vec<(String, u64)> = members
            .iter()
            .map(|&i| (labels[i].clone(), freq.count(&labels[i])))
            .collect();
        tops.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        tops.truncate(m);
        let medoid = members
            .iter()
            .map(|&i| (sq_dist(&points[i], &assign.centroids[c]), labels[i].as_str()))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)))
            .map(|(_, l)| l.to_string())
            .unwrap();
        out.push(ClusterSummary { cluster: c, size: members.len(), top_headers: tops, medoid });
    }
    out
}

/// The `top_n` cluster pairs with smallest centroid distance, reported by
/// medoid labels, normalized so label_a < label_b, sorted by distance then
/// lexicographically.
pub fn similar_concepts(
    summaries: &[ClusterSummary],
    centroids: &[Vec<f64>],
    top_n: usize,
) -> Vec<ConceptSimilarityPair> {
    assert!(summaries.len() >= 2, "need at least two clusters");
    let mut pairs = Vec::new();
    for (i, a) in summaries.iter().enumerate() {
        for b in summaries.iter().skip(i + 1) {
            let distance = sq_dist(&centroids[a.cluster], &centroids[b.cluster]).sqrt();
            let (la, lb) = if a.medoid <= b.medoid {
                (a.medoid.clone(), b.medoid.clone())
            } else {
                (b.medoid.clone(), a.medoid.clone())
            };
            pairs.push(ConceptSimilarityPair { label_a: la, label_b: lb, distance });
        }
    }
    pairs.sort_by(|x, y| {
        x.distance
            .partial_cmp(&y.distance)
            .unwrap()
            .then_with(|| x.label_a.cmp(&y.label_a))
            .then_with(|| x.label_b.cmp(&y.label_b))
    });
    pairs.truncate(top_n);
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headcount::count_headers;
    use crate::corpus::{tokenize, HeaderLevel, HeaderRecord};

    fn rec(text: &str) -> HeaderRecord {
        HeaderRecord {
            doc_id: "d".into(),
            level: HeaderLevel::Top,
            normalized: text.into(),
            tokens: tokenize(text),
        }
    }

    fn freq_of(counts: &[(&str, usize)]) -> FrequencyTable {
        let headers: Vec<HeaderRecord> = counts
            .iter()
            .flat_map(|&(l, c)| std::iter::repeat_n(rec(l), c))
            .collect();
        count_headers(&headers)
    }

    fn assign2() -> (ClusterAssignment, Vec<Vec<f64>>, Vec<String>) {
        let points = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 10.0],
        ];
        let assign = ClusterAssignment {
            labels: vec![0, 0, 1],
            centroids: vec![vec![0.0, 0.5], vec![10.0, 10.0]],
            inertia: 0.5,
            inertia_history: vec![0.5],
        };
        let labels = vec!["intro".to_string(), "introduction".to_string(), "methods".to_string()];
        (assign, points, labels)
    }

    #[test]
    fn top_headers_by_corpus_frequency() {
        let (assign, points, labels) = assign2();
        let freq = freq_of(&[("intro", 5), ("introduction", 9), ("methods", 2)]);
        let s = summarize_clusters(&assign, &points, &labels, &freq, 1);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].top_headers, vec![("introduction".to_string(), 9)]);
        assert_eq!(s[0].size, 2);
    }

    #[test]
    fn singleton_medoid_is_only_member() {
        let (assign, points, labels) = assign2();
        let freq = freq_of(&[("intro", 1), ("introduction", 1), ("methods", 1)]);
        let s = summarize_clusters(&assign, &points, &labels, &freq, 3);
        assert_eq!(s[1].medoid, "methods");
    }

    #[test]
    fn m_larger_than_cluster_returns_all() {
        let (assign, points, labels) = assign2();
        let freq = freq_of(&[("intro", 1), ("introduction", 1), ("methods", 1)]);
        let s = summarize_clusters(&assign, &points, &labels, &freq, 10);
        assert_eq!(s[0].top_headers.len(), 2);
    }

    fn summaries3() -> (Vec<ClusterSummary>, Vec<Vec<f64>>) {
        let mk = |c: usize, medoid: &str| ClusterSummary {
            cluster: c,
            size: 1,
            top_headers: vec![],
            medoid: medoid.into(),
        };
        (
            vec![mk(0, "approach"), mk(1, "methodology"), mk(2, "references")],
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![50.0, 50.0]],
        )
    }

    #[test]
    fn closest_pair_first() {
        let (s, c) = summaries3();
        let pairs = similar_concepts(&s, &c, 1);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].label_a, "approach");
        assert_eq!(pairs[0].label_b, "methodology");
        assert!((pairs[0].distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_n_covers_all_pairs() {
        let (s, c) = summaries3();
        let pairs = similar_concepts(&s, &c, 100);
        assert_eq!(pairs.len(), 3);
        for p in &pairs {
            assert!(p.label_a < p.label_b);
        }
    }

    #[test]
    fn coincident_centroids_rank_first() {
        let (s, mut c) = summaries3();
        c[2] = c[0].clone();
        let pairs = similar_concepts(&s, &c, 3);
        assert!((pairs[0].distance).abs() < 1e-12);
        assert_eq!(pairs[0].label_a, "approach");
        assert_eq!(pairs[0].label_b, "references");
    }
}
