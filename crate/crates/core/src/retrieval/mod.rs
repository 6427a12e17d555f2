//! Paragraph scoring and ranking within one judgment.

pub mod bm25;
pub mod dense;
pub mod embeddings;
pub mod external;
pub mod rank;
pub mod tokenize;

pub use bm25::{bm25_score, Bm25Params, TermIndex};
pub use dense::{dot_score, maxsim_score, Matrix};
pub use embeddings::{EmbeddingKey, EmbeddingStore, Granularity};
pub use external::{load_external_scores, ExternalScores};
pub use rank::rank_paragraphs;
pub use tokenize::Tokenizer;
pub mod scorer;

pub use scorer::{score_pairs, Method, Scorer};
