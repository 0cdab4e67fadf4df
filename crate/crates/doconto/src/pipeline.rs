//! Batch pipeline: ordered stages with digest-based caching.
//!
//! Each stage reads files, writes files, and records sha-256 digests of
//! both in the run manifest. A stage whose parameters, input digests and
//! output digests all match the previous manifest is skipped, so reruns
//! are no-ops and deleting one artifact recomputes only its stage and any
//! descendants whose inputs actually changed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::corpus::{
    header_records, read_corpus, read_corpus_collect, tokenize, DocumentRecord, HeaderLevel,
    HeaderRecord, ReadKind,
};
use crate::encoder::{
    build_vocabulary, encode_header, read_checkpoint, train_cae, train_vae, write_checkpoint,
    write_embedding_tsv, write_loss_history_csv, Autoencoder, Checkpoint, ModelKind, TrainConfig,
    read_embedding_tsv,
};
use crate::headcount::{count_headers, select_candidates, write_candidates_tsv};
use crate::manifold::{
    kmeans, similar_concepts, summarize_clusters, tsne, write_lowdim_tsv, read_lowdim_tsv,
    ClusterAssignment, ClusterSummary, ConceptSimilarityPair, TsneConfig,
};
use crate::ontology::{
    annotate_document, build_base_ontology_with_iri, default_aliases, emit_turtle,
    read_aliases_tsv, AnnotatedDocument, AnnotationContext, OntologyScope, DEFAULT_BASE_IRI,
    DEFAULT_CONTENT_BYTE_LIMIT,
};
use crate::plot::{render_scatter, PlotConfig};
use crate::topics::{
    build_lexicon, read_topic_model, to_bow, train_lda, write_topic_model, LexiconMode,
    DEFAULT_LEXICON_CAP, DEFAULT_MAX_FRACTION, DEFAULT_MIN_SECTIONS,
};

pub const STAGES: [&str; 11] = [
    "ingest", "count", "train", "embed", "tsne", "cluster", "summarize", "lda", "ontology",
    "annotate", "plot",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct LdaParams {
    pub mode: LexiconMode,
    pub topics: usize,
    pub passes: usize,
    pub alpha: f64,
    pub beta: f64,
    pub min_sections: usize,
    pub max_fraction: f64,
    pub cap: usize,
    pub inference_sweeps: usize,
    pub semantic_terms: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub workdir: PathBuf,
    pub seed: u64,
    pub stages: Vec<String>,
    pub min_count: u64,
    pub vocab_size: usize,
    pub min_token_count: usize,
    pub model: ModelKind,
    pub train: TrainConfig,
    pub tsne: TsneConfig,
    pub cluster_k: usize,
    pub cluster_max_iter: usize,
    pub summary_top: usize,
    pub summary_pairs: usize,
    pub lda: LdaParams,
    pub scope: OntologyScope,
    pub base_iri: String,
    pub content_byte_limit: usize,
    pub aliases: Option<PathBuf>,
    pub plot_width: f64,
    pub plot_height: f64,
    pub plot_radius: f64,
}

impl PipelineConfig {
    /// Build the typed config from flat keys; missing keys take defaults.
    pub fn from_config(cfg: &Config) -> Result<Self, PipelineError> {
        let seed: u64 = cfg.get_parsed("seed", 0)?;
        let train = TrainConfig {
            seq_len: cfg.get_parsed("train.seq_len", 15)?,
            embed_dim: cfg.get_parsed("train.embed_dim", 100)?,
            hidden_dim: cfg.get_parsed("train.hidden_dim", 100)?,
            latent_dim: cfg.get_parsed("train.latent_dim", 32)?,
            batch_size: cfg.get_parsed("train.batch_size", 64)?,
            epochs: cfg.get_parsed("train.epochs", 1000)?,
            learning_rate: cfg.get_parsed("train.learning_rate", 1e-3)?,
            optimizer: cfg
                .get_str("train.optimizer", "rmsprop")
                .parse()
                .map_err(|e: String| PipelineError::Config(e))?,
            seed,
            validation_fraction: cfg.get_parsed("train.validation_fraction", 0.1)?,
            eps_std: cfg.get_parsed("train.eps_std", 1.0)?,
            conv_width: cfg.get_parsed("train.conv_width", 3)?,
            conv_channels: cfg.get_parsed("train.conv_channels", 64)?,
            pool_factor: cfg.get_parsed("train.pool_factor", 2)?,
        };
        let model = match cfg.get_str("train.model", "vae").as_str() {
            "vae" => ModelKind::Vae,
            "cae" => ModelKind::Cae,
            other => {
                return Err(PipelineError::Config(format!(
                    "train.model must be vae or cae, got {other:?}"
                )))
            }
        };
        let stages_raw = cfg.get_str("stages", "all");
        let stages: Vec<String> = if stages_raw == "all" {
            STAGES.iter().map(|s| s.to_string()).collect()
        } else {
            let wanted: BTreeSet<&str> = stages_raw.split(',').map(str::trim).collect();
            for w in &wanted {
                if !STAGES.contains(w) {
                    return Err(PipelineError::Config(format!("unknown stage {w:?}")));
                }
            }
            STAGES
                .iter()
                .filter(|s| wanted.contains(*s))
                .map(|s| s.to_string())
                .collect()
        };
        Ok(PipelineConfig {
            corpus: PathBuf::from(cfg.get_str("corpus", "corpus.jsonl")),
            workdir: PathBuf::from(cfg.get_str("workdir", "workdir")),
            seed,
            stages,
            min_count: cfg.get_parsed("count.min_count", 2)?,
            vocab_size: cfg.get_parsed("encoder.vocab_size", 10000)?,
            min_token_count: cfg.get_parsed("encoder.min_token_count", 1)?,
            model,
            train,
            tsne: TsneConfig {
                perplexity: cfg.get_parsed("tsne.perplexity", 30.0)?,
                iterations: cfg.get_parsed("tsne.iterations", 1000)?,
                learning_rate: cfg.get_parsed("tsne.learning_rate", 200.0)?,
                seed,
            },
            cluster_k: cfg.get_parsed("cluster.k", 50)?,
            cluster_max_iter: cfg.get_parsed("cluster.max_iter", 100)?,
            summary_top: cfg.get_parsed("summarize.top", 5)?,
            summary_pairs: cfg.get_parsed("summarize.pairs", 10)?,
            lda: LdaParams {
                mode: cfg
                    .get_str("lda.mode", "word")
                    .parse()
                    .map_err(|e: String| PipelineError::Config(e))?,
                topics: cfg.get_parsed("lda.topics", 20)?,
                passes: cfg.get_parsed("lda.passes", 50)?,
                alpha: cfg.get_parsed("lda.alpha", 0.1)?,
                beta: cfg.get_parsed("lda.beta", 0.01)?,
                min_sections: cfg.get_parsed("lda.min_sections", DEFAULT_MIN_SECTIONS)?,
                max_fraction: cfg.get_parsed("lda.max_fraction", DEFAULT_MAX_FRACTION)?,
                cap: cfg.get_parsed("lda.cap", DEFAULT_LEXICON_CAP)?,
                inference_sweeps: cfg.get_parsed("lda.inference_sweeps", 20)?,
                semantic_terms: cfg.get_parsed("lda.semantic_terms", 5)?,
            },
            scope: cfg
                .get_str("ontology.scope", "both")
                .parse()
                .map_err(PipelineError::Config)?,
            base_iri: cfg.get_str("ontology.base_iri", DEFAULT_BASE_IRI),
            content_byte_limit: cfg
                .get_parsed("ontology.content_byte_limit", DEFAULT_CONTENT_BYTE_LIMIT)?,
            aliases: cfg.get("ontology.aliases").map(PathBuf::from),
            plot_width: cfg.get_parsed("plot.width", 800.0)?,
            plot_height: cfg.get_parsed("plot.height", 600.0)?,
            plot_radius: cfg.get_parsed("plot.radius", 4.0)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StageRecord {
    pub name: String,
    pub params_digest: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub elapsed_ms: u128,
    pub cached: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct RunManifest {
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn text_digest(s: &str) -> String {
    format!("{:x}", Sha256::digest(s.as_bytes()))
}

fn level_text(l: HeaderLevel) -> &'static str {
    match l {
        HeaderLevel::Top => "top",
        HeaderLevel::Subsection => "subsection",
        HeaderLevel::Subsubsection => "subsubsection",
    }
}

fn parse_level(s: &str) -> Result<HeaderLevel, PipelineError> {
    match s {
        "top" => Ok(HeaderLevel::Top),
        "subsection" => Ok(HeaderLevel::Subsection),
        "subsubsection" => Ok(HeaderLevel::Subsubsection),
        other => Err(PipelineError::Data(format!("bad header level {other:?}"))),
    }
}

pub fn write_headers_tsv<W: Write>(w: &mut W, records: &[HeaderRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.doc_id, level_text(r.level), r.normalized)?;
    }
    Ok(())
}

pub fn read_headers_tsv(path: &Path) -> Result<Vec<HeaderRecord>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(3, '\t').collect();
        if parts.len() != 3 {
            return Err(PipelineError::Data(format!(
                "{}:{}: expected 3 tab-separated fields",
                path.display(),
                i + 1
            )));
        }
        out.push(HeaderRecord {
            doc_id: parts[0].to_string(),
            level: parse_level(parts[1])?,
            normalized: parts[2].to_string(),
            tokens: tokenize(parts[2]),
        });
    }
    Ok(out)
}

/// Header labels paired with their clustering, as stored in clusters.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub headers: Vec<String>,
    pub assignment: ClusterAssignment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryArtifact {
    pub summaries: Vec<ClusterSummary>,
    pub pairs: Vec<ConceptSimilarityPair>,
}

fn open_out(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let f = File::open(path)?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut w = open_out(path)?;
    serde_json::to_writer(&mut w, value)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Unique normalized headers, sorted; the rows of the embedding matrix.
fn unique_headers(records: &[HeaderRecord]) -> Vec<String> {
    let set: BTreeSet<&str> = records.iter().map(|r| r.normalized.as_str()).collect();
    set.into_iter().map(|s| s.to_string()).collect()
}

fn header_record_for(label: &str) -> HeaderRecord {
    HeaderRecord {
        doc_id: String::new(),
        level: HeaderLevel::Top,
        normalized: label.to_string(),
        tokens: tokenize(label),
    }
}

/// Full-read the corpus, keeping only documents that carry sections.
fn sectioned_documents(path: &Path) -> Result<Vec<DocumentRecord>, PipelineError> {
    let reader = read_corpus(path, ReadKind::Full)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    Ok(reader.filter_map(Result::ok).collect())
}

fn load_aliases(cfg: &PipelineConfig) -> Result<BTreeMap<String, String>, PipelineError> {
    match &cfg.aliases {
        None => Ok(default_aliases()),
        Some(p) => {
            let f = File::open(p)
                .map_err(|e| PipelineError::Config(format!("aliases {}: {e}", p.display())))?;
            Ok(read_aliases_tsv(BufReader::new(f))?)
        }
    }
}

struct StagePlan {
    name: &'static str,
    params: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn stage_plans(cfg: &PipelineConfig) -> Vec<StagePlan> {
    let w = |f: &str| cfg.workdir.join(f);
    let t = &cfg.train;
    let mut aliases_input = Vec::new();
    if let Some(a) = &cfg.aliases {
        aliases_input.push(a.clone());
    }
    vec![
        StagePlan {
            name: "ingest",
            params: String::new(),
            inputs: vec![cfg.corpus.clone()],
            outputs: vec![w("headers.tsv")],
        },
        StagePlan {
            name: "count",
            params: format!("min_count={}", cfg.min_count),
            inputs: vec![w("headers.tsv")],
            outputs: vec![w("candidates.tsv")],
        },
        StagePlan {
            name: "train",
            params: format!(
                "model={:?} seed={} L={} E={} H={} d={} batch={} epochs={} lr={} opt={:?} \
                 vf={} eps={} cw={} cc={} pf={} vocab={} mintok={}",
                cfg.model, cfg.seed, t.seq_len, t.embed_dim, t.hidden_dim, t.latent_dim,
                t.batch_size, t.epochs, t.learning_rate, t.optimizer, t.validation_fraction,
                t.eps_std, t.conv_width, t.conv_channels, t.pool_factor, cfg.vocab_size,
                cfg.min_token_count
            ),
            inputs: vec![w("headers.tsv")],
            outputs: vec![w("model.json"), w("loss.csv")],
        },
        StagePlan {
            name: "embed",
            params: String::new(),
            inputs: vec![w("headers.tsv"), w("model.json")],
            outputs: vec![w("embedding.tsv")],
        },
        StagePlan {
            name: "tsne",
            params: format!(
                "perplexity={} iterations={} lr={} seed={}",
                cfg.tsne.perplexity, cfg.tsne.iterations, cfg.tsne.learning_rate, cfg.seed
            ),
            inputs: vec![w("embedding.tsv")],
            outputs: vec![w("lowdim.tsv")],
        },
        StagePlan {
            name: "cluster",
            params: format!("k={} max_iter={} seed={}", cfg.cluster_k, cfg.cluster_max_iter, cfg.seed),
            inputs: vec![w("embedding.tsv")],
            outputs: vec![w("clusters.json")],
        },
        StagePlan {
            name: "summarize",
            params: format!("top={} pairs={}", cfg.summary_top, cfg.summary_pairs),
            inputs: vec![w("headers.tsv"), w("embedding.tsv"), w("clusters.json")],
            outputs: vec![w("summary.json")],
        },
        StagePlan {
            name: "lda",
            params: format!(
                "mode={:?} topics={} passes={} alpha={} beta={} min_sections={} max_fraction={} \
                 cap={} seed={}",
                cfg.lda.mode, cfg.lda.topics, cfg.lda.passes, cfg.lda.alpha, cfg.lda.beta,
                cfg.lda.min_sections, cfg.lda.max_fraction, cfg.lda.cap, cfg.seed
            ),
            inputs: vec![cfg.corpus.clone()],
            outputs: vec![w("lda.json")],
        },
        StagePlan {
            name: "ontology",
            params: format!("scope={:?} base_iri={}", cfg.scope, cfg.base_iri),
            inputs: vec![],
            outputs: vec![w("ontology.ttl")],
        },
        StagePlan {
            name: "annotate",
            params: format!(
                "scope={:?} base_iri={} content_limit={} terms={} sweeps={}",
                cfg.scope, cfg.base_iri, cfg.content_byte_limit, cfg.lda.semantic_terms,
                cfg.lda.inference_sweeps
            ),
            inputs: [vec![cfg.corpus.clone(), w("lda.json")], aliases_input].concat(),
            outputs: vec![w("annotations.json"), w("annotated.ttl")],
        },
        StagePlan {
            name: "plot",
            params: format!(
                "width={} height={} radius={}",
                cfg.plot_width, cfg.plot_height, cfg.plot_radius
            ),
            inputs: vec![w("lowdim.tsv"), w("clusters.json"), w("summary.json")],
            outputs: vec![w("clusters.svg")],
        },
    ]
}

fn run_stage(name: &str, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let w = |f: &str| cfg.workdir.join(f);
    match name {
        "ingest" => {
            let (docs, _diags) = read_corpus_collect(&cfg.corpus, ReadKind::HeadersOnly)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let (records, _dropped) = header_records(&docs);
            if records.is_empty() {
                return Err(PipelineError::Data("corpus yielded no headers".into()));
            }
            write_headers_tsv(&mut open_out(&w("headers.tsv"))?, &records)?;
        }
        "count" => {
            let records = read_headers_tsv(&w("headers.tsv"))?;
            let table = count_headers(&records);
            let candidates = select_candidates(&table, cfg.min_count);
            write_candidates_tsv(&mut open_out(&w("candidates.tsv"))?, &candidates)?;
        }
        "train" => {
            let records = read_headers_tsv(&w("headers.tsv"))?;
            let vocab = build_vocabulary(&records, cfg.vocab_size, cfg.min_token_count);
            let encoded: Vec<_> = records
                .iter()
                .map(|r| encode_header(r, &vocab, cfg.train.seq_len))
                .collect();
            let (model, history) = match cfg.model {
                ModelKind::Vae => {
                    let (p, h) = train_vae(&encoded, vocab.size(), &cfg.train)
                        .map_err(train_error)?;
                    (Autoencoder::Vae(p), h)
                }
                ModelKind::Cae => {
                    let (p, h) = train_cae(&encoded, vocab.size(), &cfg.train)
                        .map_err(train_error)?;
                    (Autoencoder::Cae(p), h)
                }
            };
            let ckpt = Checkpoint {
                config: cfg.train.clone(),
                vocab: vocab.tokens().to_vec(),
                model,
            };
            write_checkpoint(&mut open_out(&w("model.json"))?, &ckpt)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            write_loss_history_csv(&mut open_out(&w("loss.csv"))?, &history)?;
        }
        "embed" => {
            let (ckpt, vocab) = read_checkpoint(BufReader::new(File::open(w("model.json"))?))
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let records = read_headers_tsv(&w("headers.tsv"))?;
            let labels = unique_headers(&records);
            let encoded: Vec<_> = labels
                .iter()
                .map(|l| encode_header(&header_record_for(l), &vocab, ckpt.config.seq_len))
                .collect();
            let em = ckpt.model.embed_headers(&encoded, &labels);
            write_embedding_tsv(&mut open_out(&w("embedding.tsv"))?, &em)?;
        }
        "tsne" => {
            let em = read_embedding_tsv(BufReader::new(File::open(w("embedding.tsv"))?))
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let result = tsne(&em, &cfg.tsne).map_err(manifold_error)?;
            write_lowdim_tsv(&mut open_out(&w("lowdim.tsv"))?, &result.embedding)?;
        }
        "cluster" => {
            let em = read_embedding_tsv(BufReader::new(File::open(w("embedding.tsv"))?))
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let points: Vec<Vec<f64>> = (0..em.len()).map(|i| em.row(i).to_vec()).collect();
            let assignment =
                kmeans(&points, cfg.cluster_k, cfg.seed, cfg.cluster_max_iter).map_err(manifold_error)?;
            write_json(
                &w("clusters.json"),
                &ClusterArtifact { headers: em.labels.clone(), assignment },
            )?;
        }
        "summarize" => {
            let records = read_headers_tsv(&w("headers.tsv"))?;
            let em = read_embedding_tsv(BufReader::new(File::open(w("embedding.tsv"))?))
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let artifact: ClusterArtifact = read_json(&w("clusters.json"))?;
            let freq = count_headers(&records);
            let points: Vec<Vec<f64>> = (0..em.len()).map(|i| em.row(i).to_vec()).collect();
            let summaries = summarize_clusters(
                &artifact.assignment,
                &points,
                &em.labels,
                &freq,
                cfg.summary_top,
            );
            let pairs = if summaries.len() >= 2 {
                similar_concepts(&summaries, &artifact.assignment.centroids, cfg.summary_pairs)
            } else {
                Vec::new()
            };
            write_json(&w("summary.json"), &SummaryArtifact { summaries, pairs })?;
        }
        "lda" => {
            let docs = sectioned_documents(&cfg.corpus)?;
            let mut texts = Vec::new();
            let mut ids = Vec::new();
            for d in &docs {
                for (i, s) in d.sections.iter().flatten().enumerate() {
                    texts.push(s.body.clone());
                    ids.push((d.doc_id.clone(), i));
                }
            }
            let lexicon = build_lexicon(
                &texts,
                cfg.lda.mode,
                cfg.lda.min_sections,
                cfg.lda.max_fraction,
                cfg.lda.cap,
            )
            .map_err(|e| PipelineError::Data(e.to_string()))?;
            let bows: Vec<_> = texts
                .iter()
                .zip(&ids)
                .map(|(t, (id, ord))| to_bow(t, &lexicon, id, *ord))
                .collect();
            let model = train_lda(
                &bows,
                &lexicon,
                cfg.lda.topics,
                cfg.lda.passes,
                cfg.lda.alpha,
                cfg.lda.beta,
                cfg.seed,
            )
            .map_err(|e| PipelineError::Data(e.to_string()))?;
            write_topic_model(&mut open_out(&w("lda.json"))?, &model)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
        }
        "ontology" => {
            let graph = build_base_ontology_with_iri(cfg.scope, &cfg.base_iri);
            std::fs::write(w("ontology.ttl"), emit_turtle(&graph, &[]))?;
        }
        "annotate" => {
            let graph = build_base_ontology_with_iri(cfg.scope, &cfg.base_iri);
            let docs = sectioned_documents(&cfg.corpus)?;
            let model = read_topic_model(BufReader::new(File::open(w("lda.json"))?))
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let aliases = load_aliases(cfg)?;
            let mut ctx = AnnotationContext::new(&aliases);
            ctx.topic_model = Some(&model);
            ctx.k_terms = cfg.lda.semantic_terms;
            ctx.inference_sweeps = cfg.lda.inference_sweeps;
            ctx.content_byte_limit = cfg.content_byte_limit;
            let mut annotations: Vec<AnnotatedDocument> = Vec::new();
            for d in &docs {
                if !graph.has_doc_type(d.doc_type) {
                    continue; // out-of-scope documents are skipped, not fatal
                }
                annotations.push(
                    annotate_document(d, &graph, &ctx)
                        .map_err(|e| PipelineError::Data(e.to_string()))?,
                );
            }
            write_json(&w("annotations.json"), &annotations)?;
            std::fs::write(w("annotated.ttl"), emit_turtle(&graph, &annotations))?;
        }
        "plot" => {
            let lowdim = read_lowdim_tsv(BufReader::new(File::open(w("lowdim.tsv"))?))
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let artifact: ClusterArtifact = read_json(&w("clusters.json"))?;
            if lowdim.labels != artifact.headers {
                return Err(PipelineError::Data(
                    "lowdim labels do not align with cluster labels".into(),
                ));
            }
            let summary: SummaryArtifact = read_json(&w("summary.json"))?;
            let plot_cfg = PlotConfig {
                width: cfg.plot_width,
                height: cfg.plot_height,
                point_radius: cfg.plot_radius,
                margin: 0.05,
                medoid_labels: summary
                    .summaries
                    .iter()
                    .map(|s| (s.cluster, s.medoid.clone()))
                    .collect(),
            };
            std::fs::write(
                w("clusters.svg"),
                render_scatter(&lowdim, &artifact.assignment, &plot_cfg),
            )?;
        }
        other => return Err(PipelineError::Config(format!("unknown stage {other:?}"))),
    }
    Ok(())
}

fn train_error(e: crate::encoder::TrainError) -> PipelineError {
    use crate::encoder::TrainError as T;
    match e {
        T::Diverged { .. } => PipelineError::Numeric(e.to_string()),
        T::InvalidConfig(_) => PipelineError::Config(e.to_string()),
        _ => PipelineError::Data(e.to_string()),
    }
}

fn manifold_error(e: crate::manifold::ManifoldError) -> PipelineError {
    use crate::manifold::ManifoldError as M;
    match e {
        M::NonFinite { .. } => PipelineError::Numeric(e.to_string()),
        M::Parameter(_) => PipelineError::Config(e.to_string()),
        other => PipelineError::Data(other.to_string()),
    }
}

/// Run one stage directly, without manifest bookkeeping; its inputs must
/// already exist in the workdir.
pub fn run_single_stage(cfg: &PipelineConfig, stage: &str) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&cfg.workdir)?;
    run_stage(stage, cfg)
}

fn manifest_path(workdir: &Path) -> PathBuf {
    workdir.join("manifest.json")
}

fn load_manifest(workdir: &Path) -> RunManifest {
    File::open(manifest_path(workdir))
        .ok()
        .and_then(|f| serde_json::from_reader(BufReader::new(f)).ok())
        .unwrap_or_default()
}

fn save_manifest(workdir: &Path, m: &RunManifest) -> Result<(), PipelineError> {
    write_json(&manifest_path(workdir), m)
}

fn digests_of(paths: &[PathBuf]) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    for p in paths {
        let d = file_digest(p).map_err(|e| {
            PipelineError::Data(format!("missing stage file {}: {e}", p.display()))
        })?;
        out.insert(p.display().to_string(), d);
    }
    Ok(out)
}

fn cache_hit(prev: Option<&StageRecord>, params_digest: &str, inputs: &BTreeMap<String, String>) -> bool {
    let Some(rec) = prev else { return false };
    if rec.params_digest != params_digest || rec.inputs != *inputs {
        return false;
    }
    // every recorded output must still exist with the recorded digest
    rec.outputs.iter().all(|(path, digest)| {
        file_digest(Path::new(path)).map(|d| d == *digest).unwrap_or(false)
    })
}

/// Run the enabled stages in dependency order. A stage failure halts the
/// run; the manifest on disk records all completed stages.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    if !cfg.corpus.is_file() {
        return Err(PipelineError::Config(format!(
            "corpus {} does not exist",
            cfg.corpus.display()
        )));
    }
    std::fs::create_dir_all(&cfg.workdir)?;
    let previous = load_manifest(&cfg.workdir);
    let mut manifest = RunManifest { seed: cfg.seed, stages: Vec::new() };

    for plan in stage_plans(cfg) {
        if !cfg.stages.iter().any(|s| s == plan.name) {
            continue;
        }
        let params_digest = text_digest(&plan.params);
        let inputs = digests_of(&plan.inputs)?;
        let prev = previous.stages.iter().find(|s| s.name == plan.name);
        let start = Instant::now();
        let cached = cache_hit(prev, &params_digest, &inputs);
        if !cached {
            run_stage(plan.name, cfg)?;
        }
        let outputs = digests_of(&plan.outputs)?;
        manifest.stages.push(StageRecord {
            name: plan.name.to_string(),
            params_digest,
            inputs,
            outputs,
            elapsed_ms: start.elapsed().as_millis(),
            cached,
        });
        save_manifest(&cfg.workdir, &manifest)?;
    }
    Ok(manifest)
}
