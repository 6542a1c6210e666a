//! Video-to-topics pipeline: frame extraction through an external decoder,
//! perceptual-hash deduplication, captioning, LDA with a cross-validated
//! hyperparameter sweep, topic reports, and a human-validation service.
//!
//! The numerical and text algorithms live in [`vistopics_core`]; this crate
//! adds files, processes, HTTP, and the command line.

pub mod caption;
pub mod cli;
pub mod config;
pub mod dedup;
pub mod error;
pub mod lda;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod server;
pub mod store;
pub mod validate;
pub mod video;

pub use config::Config;
pub use error::{Error, Result};
pub use pipeline::Pipeline;
pub use store::Store;
