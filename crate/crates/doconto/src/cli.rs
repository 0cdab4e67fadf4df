//! Command-line front end: one subcommand per pipeline stage plus the
//! whole pipeline. Values come from the optional config file; any key can
//! be overridden with repeated `--set key=value` flags, and flags win.

use std::io::BufReader;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::corpus::{read_corpus_collect, ReadKind};
use crate::pipeline::{run_pipeline, run_single_stage, PipelineConfig, PipelineError};
use crate::topics::{build_lexicon, read_topic_model, semantic_terms, write_lexicon};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "doconto", version, about = "Induce a document ontology from sectioned corpora")]
pub struct Cli {
    /// flat key=value config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// global random seed (overrides config `seed`)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// artifact directory (overrides config `workdir`)
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// corpus JSONL path (overrides config `corpus`)
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// override any config key, e.g. --set cluster.k=12 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read the corpus and write normalized headers.tsv
    Ingest,
    /// Count headers and write candidate concepts
    Count,
    /// Train the variational autoencoder
    TrainVae,
    /// Train the convolutional autoencoder
    TrainCae,
    /// Embed unique headers with the trained model
    Embed,
    /// Project the embedding to 2-D with t-SNE
    Tsne,
    /// k-means cluster the embedding
    Cluster,
    /// Summarize clusters (top headers, medoids, similar pairs)
    Summarize,
    /// Build and write the LDA term lexicon
    LdaBuildLexicon,
    /// Train the LDA topic model
    LdaTrain,
    /// Print top terms per topic, or semantic terms for --text
    LdaTerms {
        /// terms per topic
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// section text to infer semantic terms for
        #[arg(long)]
        text: Option<String>,
    },
    /// Emit the base ontology as Turtle
    OntoEmit,
    /// Annotate documents and emit Turtle + JSON
    Annotate,
    /// Render the cluster scatter SVG
    Plot,
    /// Run all stages in order with caching
    Pipeline,
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::new(),
    };
    for kv in &cli.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(PipelineError::Config(format!(
                "--set expects key=value, got {kv:?}"
            )));
        };
        cfg.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed.to_string());
    }
    if let Some(w) = &cli.workdir {
        cfg.set("workdir", w.display().to_string());
    }
    if let Some(c) = &cli.corpus {
        cfg.set("corpus", c.display().to_string());
    }
    match &cli.command {
        Command::TrainVae => cfg.set("train.model", "vae"),
        Command::TrainCae => cfg.set("train.model", "cae"),
        _ => {}
    }
    PipelineConfig::from_config(&cfg)
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Ingest => {
            let (docs, diags) = read_corpus_collect(&cfg.corpus, ReadKind::HeadersOnly)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            for d in &diags {
                eprintln!("warning: line {}: {}", d.line, d.message);
            }
            run_single_stage(&cfg, "ingest")?;
            println!("{} documents, {} diagnostics -> headers.tsv", docs.len(), diags.len());
        }
        Command::Count => {
            run_single_stage(&cfg, "count")?;
            println!("candidates.tsv written");
        }
        Command::TrainVae | Command::TrainCae => {
            run_single_stage(&cfg, "train")?;
            println!("model.json and loss.csv written");
        }
        Command::Embed => {
            run_single_stage(&cfg, "embed")?;
            println!("embedding.tsv written");
        }
        Command::Tsne => {
            run_single_stage(&cfg, "tsne")?;
            println!("lowdim.tsv written");
        }
        Command::Cluster => {
            run_single_stage(&cfg, "cluster")?;
            println!("clusters.json written");
        }
        Command::Summarize => {
            run_single_stage(&cfg, "summarize")?;
            println!("summary.json written");
        }
        Command::LdaBuildLexicon => {
            let (docs, _) = read_corpus_collect(&cfg.corpus, ReadKind::Full)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            let texts: Vec<String> = docs
                .iter()
                .flat_map(|d| d.sections.iter().flatten())
                .map(|s| s.body.clone())
                .collect();
            let lexicon = build_lexicon(
                &texts,
                cfg.lda.mode,
                cfg.lda.min_sections,
                cfg.lda.max_fraction,
                cfg.lda.cap,
            )
            .map_err(|e| PipelineError::Data(e.to_string()))?;
            std::fs::create_dir_all(&cfg.workdir)?;
            let mut w = std::io::BufWriter::new(std::fs::File::create(
                cfg.workdir.join("lexicon.json"),
            )?);
            write_lexicon(&mut w, &lexicon).map_err(|e| PipelineError::Data(e.to_string()))?;
            println!("lexicon.json written ({} terms)", lexicon.size());
        }
        Command::LdaTrain => {
            run_single_stage(&cfg, "lda")?;
            println!("lda.json written");
        }
        Command::LdaTerms { k, text } => {
            let f = std::fs::File::open(cfg.workdir.join("lda.json"))?;
            let model = read_topic_model(BufReader::new(f))
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            match text {
                Some(t) => {
                    let terms = semantic_terms(&model, t, *k, cfg.lda.inference_sweeps);
                    for (term, p) in terms {
                        println!("{term}\t{p:.6}");
                    }
                }
                None => {
                    for topic in 0..model.topics {
                        let terms: Vec<String> = model
                            .top_terms(topic, *k)
                            .into_iter()
                            .map(|(t, _)| t)
                            .collect();
                        println!("topic {topic}: {}", terms.join(" "));
                    }
                }
            }
        }
        Command::OntoEmit => {
            run_single_stage(&cfg, "ontology")?;
            println!("ontology.ttl written");
        }
        Command::Annotate => {
            run_single_stage(&cfg, "annotate")?;
            println!("annotations.json and annotated.ttl written");
        }
        Command::Plot => {
            run_single_stage(&cfg, "plot")?;
            println!("clusters.svg written");
        }
        Command::Pipeline => {
            let manifest = run_pipeline(&cfg)?;
            for s in &manifest.stages {
                let how = if s.cached { "cached" } else { "ran" };
                println!("stage {:<10} {how} ({} ms)", s.name, s.elapsed_ms);
            }
        }
    }
    Ok(())
}

pub fn exit_code(err: &PipelineError) -> i32 {
    match err {
        PipelineError::Config(_) => EXIT_USAGE,
        PipelineError::Data(_) | PipelineError::Io(_) => EXIT_DATA,
        PipelineError::Numeric(_) => EXIT_NUMERIC,
    }
}

/// Parse args and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own message; --help/--version are success
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
