//! Count-based candidate-concept mining over normalized headers.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::HeaderRecord;

/// Occurrence counts per normalized header.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub entries: BTreeMap<String, u64>,
    pub total: u64,
}

impl FrequencyTable {
    pub fn count(&self, label: &str) -> u64 {
        self.entries.get(label).copied().unwrap_or(0)
    }

    /// Merge partial counts; associative and commutative.
    pub fn merge(mut self, other: FrequencyTable) -> FrequencyTable {
        for (k, v) in other.entries {
            *self.entries.entry(k).or_insert(0) += v;
        }
        self.total += other.total;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateConcept {
    pub label: String,
    pub count: u64,
    /// 1-based rank by descending count, ties broken lexicographically.
    pub rank: usize,
}

/// Exact multiset counts of normalized headers; order-independent.
pub fn count_headers<'a, I>(headers: I) -> FrequencyTable
where
    I: IntoIterator<Item = &'a HeaderRecord>,
{
    let mut table = FrequencyTable::default();
    for h in headers {
        *table.entries.entry(h.normalized.clone()).or_insert(0) += 1;
        table.total += 1;
    }
    table
}

/// Document-frequency variant: each header counted at most once per doc_id.
pub fn count_headers_per_document<'a, I>(headers: I) -> FrequencyTable
where
    I: IntoIterator<Item = &'a HeaderRecord>,
{
    let mut seen = std::collections::HashSet::new();
    let mut table = FrequencyTable::default();
    for h in headers {
        if seen.insert((h.doc_id.clone(), h.normalized.clone())) {
            *table.entries.entry(h.normalized.clone()).or_insert(0) += 1;
            table.total += 1;
        }
    }
    table
}

/// Entries with count >= min_count, sorted by (count desc, label asc),
/// ranks contiguous from 1.
pub fn select_candidates(table: &FrequencyTable, min_count: u64) -> Vec<CandidateConcept> {
    assert!(min_count >= 1, "min_count must be >= 1");
    let mut picked: Vec<(&String, u64)> = table
        .entries
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(l, &c)| (l, c))
        .collect();
    picked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    picked
        .into_iter()
        .enumerate()
        .map(|(i, (label, count))| CandidateConcept {
            label: label.clone(),
            count,
            rank: i + 1,
        })
        .collect()
}

/// TSV "label<TAB>count<TAB>rank", sorted by rank.
pub fn write_candidates_tsv<W: Write>(
    w: &mut W,
    candidates: &[CandidateConcept],
) -> std::io::Result<()> {
    for c in candidates {
        writeln!(w, "{}\t{}\t{}", c.label, c.count, c.rank)?;
    }
    Ok(())
}
