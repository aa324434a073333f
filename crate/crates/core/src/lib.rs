//! Multimodal factuality evaluation over precomputed embeddings.
//!
//! The engine scores summaries against their source images (CLIP-S) and
//! source document (BERT-S), combines the two into CLIPBERTScore, and runs
//! the surrounding meta-evaluation machinery: human-judgment aggregation and
//! correlation, agreement statistics, ranking/paired benchmark accuracies,
//! ROUGE, guidance-image selection and self-critical reward advantages.
//!
//! Embeddings are produced elsewhere and arrive in the binary container
//! format implemented in [`ingest`].

pub mod applications;
pub mod benchmarks;
pub mod combiner;
pub mod error;
pub mod ingest;
pub mod judgments;
pub mod scoring;
pub mod stats;
pub mod text;

pub use error::{Error, Result};
pub use scoring::{EmbeddingMatrix, ScoreReport, DEFAULT_ALPHA};

/// Version string stamped into every report the engine writes.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
