pub mod corpus_model;
pub mod error;
pub mod evalkit;
pub mod guide_dataset;
pub mod ingest;
pub mod io;
pub mod par;
pub mod pipeline;
pub mod retrieval;
pub mod splits;
pub mod train_export;

pub use error::{Error, ErrorKind, Result};
