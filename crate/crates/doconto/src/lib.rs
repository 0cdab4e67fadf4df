//! Induce a document ontology from corpora of sectioned documents.
//!
//! The pipeline mines candidate semantic concepts from section headers two
//! ways: by frequency counting ([`headcount`]) and by unsupervised
//! embedding-cluster analysis (autoencoder embeddings in [`encoder`],
//! t-SNE + k-means in [`manifold`]). Per-section domain terms come from an
//! LDA topic model ([`topics`]). The resulting ontology, with document
//! annotations, is serialized as RDF/Turtle ([`ontology`]).
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `doconto` binary for the batch pipeline.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod headcount;
pub mod manifold;
pub mod ontology;
pub mod pipeline;
pub mod plot;
pub mod topics;

pub use corpus::{DocumentRecord, HeaderRecord, RawHeader, SectionText};
pub use encoder::EmbeddingMatrix;
pub use headcount::{CandidateConcept, FrequencyTable};
pub use manifold::{ClusterAssignment, ClusterSummary, ConceptSimilarityPair, LowDimEmbedding};
pub use ontology::{AnnotatedDocument, OntologyGraph};
pub use topics::{TermLexicon, TopicModel, TopicPrediction};
