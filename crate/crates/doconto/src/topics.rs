//! LDA topic modeling over section texts with word/bigram/phrase lexicons.
//! Training is collapsed Gibbs sampling; inference folds a new section in
//! with the trained counts frozen. The highest-probability terms of a
//! section's argmax topic become its domain-specific semantic terms.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;

pub const DEFAULT_MIN_SECTIONS: usize = 20;
pub const DEFAULT_MAX_FRACTION: f64 = 0.10;
pub const DEFAULT_LEXICON_CAP: usize = 100_000;
const PREDICTION_TOP_TERMS: usize = 10;

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no terms survive the lexicon filters; training impossible")]
    EmptyLexicon,
    #[error("no nonempty sections to train on")]
    EmptyCorpus,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file malformed: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconMode {
    /// unigrams only
    Word,
    /// bigrams only
    Bigram,
    /// unigrams + bigrams + trigrams
    Phrase,
}

impl std::str::FromStr for LexiconMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(LexiconMode::Word),
            "bigram" => Ok(LexiconMode::Bigram),
            "phrase" => Ok(LexiconMode::Phrase),
            other => Err(format!("unknown lexicon mode {other:?} (expected word|bigram|phrase)")),
        }
    }
}

fn arities(mode: LexiconMode) -> &'static [usize] {
    match mode {
        LexiconMode::Word => &[1],
        LexiconMode::Bigram => &[2],
        LexiconMode::Phrase => &[1, 2, 3],
    }
}

/// All terms of the mode's arities from consecutive token windows,
/// space-joined, in order of appearance.
pub fn extract_terms(tokens: &[String], mode: LexiconMode) -> Vec<String> {
    let mut out = Vec::new();
    for &n in arities(mode) {
        if tokens.len() < n {
            continue;
        }
        for w in tokens.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

/// Filtered term->index vocabulary for LDA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLexicon {
    pub mode: LexiconMode,
    pub index_to_term: Vec<String>,
    /// sections containing each term, aligned with index_to_term
    pub section_frequency: Vec<u64>,
    #[serde(skip)]
    term_to_index: HashMap<String, usize>,
}

impl TermLexicon {
    fn build_index(&mut self) {
        self.term_to_index = self
            .index_to_term
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn size(&self) -> usize {
        self.index_to_term.len()
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.index_to_term[index]
    }
}

/// Keep a term iff `min_sections <= df(term) <= floor(max_fraction * N)`;
/// if survivors exceed `cap`, keep the most section-frequent (ties
/// lexicographic).
pub fn build_lexicon(
    section_texts: &[String],
    mode: LexiconMode,
    min_sections: usize,
    max_fraction: f64,
    cap: usize,
) -> Result<TermLexicon, TopicsError> {
    if section_texts.is_empty() {
        return Err(TopicsError::Parameter("no sections provided".into()));
    }
    if !(max_fraction > 0.0 && max_fraction < 1.0) {
        return Err(TopicsError::Parameter("max_fraction must be in (0, 1)".into()));
    }
    if cap == 0 {
        return Err(TopicsError::Parameter("cap must be positive".into()));
    }
    let n = section_texts.len();
    let max_sections = ((max_fraction * n as f64).floor()) as u64;
    let mut df: HashMap<String, u64> = HashMap::new();
    for text in section_texts {
        let tokens = tokenize(text);
        let mut seen: Vec<String> = extract_terms(&tokens, mode);
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let mut survivors: Vec<(String, u64)> = df
        .into_iter()
        .filter(|&(_, c)| c >= min_sections as u64 && c <= max_sections)
        .collect();
    if survivors.is_empty() {
        return Err(TopicsError::EmptyLexicon);
    }
    survivors.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    survivors.truncate(cap);
    // stable term ids: lexicographic within the kept set
    survivors.sort_by(|a, b| a.0.cmp(&b.0));
    let (index_to_term, section_frequency) = survivors.into_iter().unzip();
    let mut lex = TermLexicon {
        mode,
        index_to_term,
        section_frequency,
        term_to_index: HashMap::new(),
    };
    lex.build_index();
    Ok(lex)
}

/// Sparse counts of lexicon terms in one section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionBow {
    pub doc_id: String,
    pub ordinal: usize,
    pub counts: BTreeMap<usize, u64>,
}

impl SectionBow {
    pub fn token_count(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Count lexicon terms over consecutive token windows; out-of-lexicon
/// terms are ignored.
pub fn to_bow(section_text: &str, lex: &TermLexicon, doc_id: &str, ordinal: usize) -> SectionBow {
    let tokens = tokenize(section_text);
    let mut counts = BTreeMap::new();
    for term in extract_terms(&tokens, lex.mode) {
        if let Some(i) = lex.index(&term) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    SectionBow { doc_id: doc_id.to_string(), ordinal, counts }
}

/// Trained LDA state: count matrices from the final Gibbs sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub lexicon: TermLexicon,
    /// T x W topic-term counts, row-major
    pub topic_term: Vec<u64>,
    /// total count per topic (row sums of topic_term)
    pub topic_totals: Vec<u64>,
    /// per training document: T topic counts
    pub doc_topic: Vec<Vec<u64>>,
    /// bows skipped for being empty
    pub skipped_empty: usize,
}

impl TopicModel {
    /// phi_{t,w} = (n_{t,w} + beta) / (n_t + W*beta)
    pub fn term_probability(&self, topic: usize, term: usize) -> f64 {
        let w = self.lexicon.size() as f64;
        (self.topic_term[topic * self.lexicon.size() + term] as f64 + self.beta)
            / (self.topic_totals[topic] as f64 + w * self.beta)
    }

    pub fn top_terms(&self, topic: usize, k: usize) -> Vec<(String, f64)> {
        let mut terms: Vec<(String, f64)> = (0..self.lexicon.size())
            .map(|w| (self.lexicon.term(w).to_string(), self.term_probability(topic, w)))
            .collect();
        terms.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        terms.truncate(k);
        terms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPrediction {
    /// T probabilities summing to 1
    pub distribution: Vec<f64>,
    /// top terms of the argmax topic
    pub top_terms: Vec<(String, f64)>,
    /// section contained no lexicon terms; distribution is the prior
    pub no_lexicon_terms: bool,
}

/// Collapsed Gibbs sampler over a bow corpus. Public so tests can verify
/// count conservation after individual sweeps.
pub struct GibbsSampler<'a> {
    bows: Vec<&'a SectionBow>,
    topics: usize,
    alpha: f64,
    beta: f64,
    lexicon_size: usize,
    rng: ChaCha8Rng,
    /// per doc: (term, topic) per token instance
    assignments: Vec<Vec<(usize, usize)>>,
    topic_term: Vec<u64>,
    topic_totals: Vec<u64>,
    doc_topic: Vec<Vec<u64>>,
    pub skipped_empty: usize,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        bows: &'a [SectionBow],
        topics: usize,
        alpha: f64,
        beta: f64,
        lexicon_size: usize,
        seed: u64,
    ) -> Result<Self, TopicsError> {
        if topics < 2 {
            return Err(TopicsError::Parameter("T must be >= 2".into()));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(TopicsError::Parameter("alpha and beta must be positive".into()));
        }
        let skipped_empty = bows.iter().filter(|b| b.is_empty()).count();
        let kept: Vec<&SectionBow> = bows.iter().filter(|b| !b.is_empty()).collect();
        if kept.is_empty() {
            return Err(TopicsError::EmptyCorpus);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut topic_term = vec![0u64; topics * lexicon_size];
        let mut topic_totals = vec![0u64; topics];
        let mut doc_topic = Vec::with_capacity(kept.len());
        let mut assignments = Vec::with_capacity(kept.len());
        for bow in &kept {
            let mut dt = vec![0u64; topics];
            let mut assign = Vec::new();
            for (&term, &count) in &bow.counts {
                for _ in 0..count {
                    let t = rng.gen_range(0..topics);
                    assign.push((term, t));
                    topic_term[t * lexicon_size + term] += 1;
                    topic_totals[t] += 1;
                    dt[t] += 1;
                }
            }
            doc_topic.push(dt);
            assignments.push(assign);
        }
        Ok(GibbsSampler {
            bows: kept,
            topics,
            alpha,
            beta,
            lexicon_size,
            rng,
            assignments,
            topic_term,
            topic_totals,
            doc_topic,
            skipped_empty,
        })
    }

    /// One full sweep over every token of every document.
    pub fn sweep(&mut self) {
        let w = self.lexicon_size as f64;
        let mut weights = vec![0.0f64; self.topics];
        for d in 0..self.bows.len() {
            for i in 0..self.assignments[d].len() {
                let (term, old) = self.assignments[d][i];
                self.topic_term[old * self.lexicon_size + term] -= 1;
                self.topic_totals[old] -= 1;
                self.doc_topic[d][old] -= 1;

                let mut total = 0.0;
                for (t, cum) in weights.iter_mut().enumerate() {
                    let p = (self.doc_topic[d][t] as f64 + self.alpha)
                        * (self.topic_term[t * self.lexicon_size + term] as f64 + self.beta)
                        / (self.topic_totals[t] as f64 + w * self.beta);
                    total += p;
                    *cum = total;
                }
                let target = self.rng.gen_range(0.0..total);
                let new = weights.iter().position(|&cum| target < cum).unwrap_or(self.topics - 1);

                self.assignments[d][i] = (term, new);
                self.topic_term[new * self.lexicon_size + term] += 1;
                self.topic_totals[new] += 1;
                self.doc_topic[d][new] += 1;
            }
        }
    }

    /// Total tokens recorded in the topic-term matrix (conserved by sweeps).
    pub fn total_count(&self) -> u64 {
        self.topic_term.iter().sum()
    }

    pub fn corpus_token_count(&self) -> u64 {
        self.bows.iter().map(|b| b.token_count()).sum()
    }

    fn into_model(self, lexicon: TermLexicon, seed: u64) -> TopicModel {
        TopicModel {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            seed,
            lexicon,
            topic_term: self.topic_term,
            topic_totals: self.topic_totals,
            doc_topic: self.doc_topic,
            skipped_empty: self.skipped_empty,
        }
    }
}

/// Train by collapsed Gibbs sampling: seeded random init, `passes` full
/// sweeps. Deterministic given the seed. Empty bows are skipped and counted.
pub fn train_lda(
    bows: &[SectionBow],
    lexicon: &TermLexicon,
    topics: usize,
    passes: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<TopicModel, TopicsError> {
    let mut sampler = GibbsSampler::new(bows, topics, alpha, beta, lexicon.size(), seed)?;
    for _ in 0..passes {
        sampler.sweep();
    }
    Ok(sampler.into_model(lexicon.clone(), seed))
}

/// Fold-in Gibbs over a new section with model counts frozen.
/// theta_t = (n_t + alpha) / (total + T*alpha).
pub fn infer_topics(model: &TopicModel, section_text: &str, inference_sweeps: usize) -> TopicPrediction {
    let bow = to_bow(section_text, &model.lexicon, "", 0);
    let t_count = model.topics;
    if bow.is_empty() {
        let p = 1.0 / t_count as f64;
        return TopicPrediction {
            distribution: vec![p; t_count],
            top_terms: Vec::new(),
            no_lexicon_terms: true,
        };
    }
    let w = model.lexicon.size() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut local = vec![0u64; t_count];
    let mut assign: Vec<(usize, usize)> = Vec::new();
    for (&term, &count) in &bow.counts {
        for _ in 0..count {
            let t = rng.gen_range(0..t_count);
            local[t] += 1;
            assign.push((term, t));
        }
    }
    let mut weights = vec![0.0f64; t_count];
    for _ in 0..inference_sweeps {
        for slot in assign.iter_mut() {
            let (term, old) = *slot;
            local[old] -= 1;
            let mut total = 0.0;
            for (t, cum) in weights.iter_mut().enumerate() {
                let p = (local[t] as f64 + model.alpha)
                    * (model.topic_term[t * model.lexicon.size() + term] as f64 + model.beta)
                    / (model.topic_totals[t] as f64 + w * model.beta);
                total += p;
                *cum = total;
            }
            let target = rng.gen_range(0.0..total);
            let new = weights.iter().position(|&cum| target < cum).unwrap_or(t_count - 1);
            *slot = (term, new);
            local[new] += 1;
        }
    }
    let denom = assign.len() as f64 + t_count as f64 * model.alpha;
    let distribution: Vec<f64> = local
        .iter()
        .map(|&n| (n as f64 + model.alpha) / denom)
        .collect();
    let argmax = distribution
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    TopicPrediction {
        distribution,
        top_terms: model.top_terms(argmax, PREDICTION_TOP_TERMS),
        no_lexicon_terms: false,
    }
}

/// The k most probable terms of the section's argmax topic; empty when the
/// section holds no lexicon terms.
pub fn semantic_terms(
    model: &TopicModel,
    section_text: &str,
    k: usize,
    inference_sweeps: usize,
) -> Vec<(String, f64)> {
    assert!(k >= 1);
    let pred = infer_topics(model, section_text, inference_sweeps);
    if pred.no_lexicon_terms {
        return Vec::new();
    }
    let argmax = pred
        .distribution
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    model.top_terms(argmax, k)
}

pub fn write_topic_model<W: Write>(w: &mut W, model: &TopicModel) -> Result<(), TopicsError> {
    serde_json::to_writer(&mut *w, model).map_err(|e| TopicsError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_lexicon<W: Write>(w: &mut W, lex: &TermLexicon) -> Result<(), TopicsError> {
    serde_json::to_writer(&mut *w, lex).map_err(|e| TopicsError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_lexicon<R: BufRead>(r: R) -> Result<TermLexicon, TopicsError> {
    let mut lex: TermLexicon =
        serde_json::from_reader(r).map_err(|e| TopicsError::Format(e.to_string()))?;
    lex.build_index();
    Ok(lex)
}

pub fn read_topic_model<R: BufRead>(r: R) -> Result<TopicModel, TopicsError> {
    let mut model: TopicModel =
        serde_json::from_reader(r).map_err(|e| TopicsError::Format(e.to_string()))?;
    model.lexicon.build_index();
    Ok(model)
}
