//! Financial topic-modeling toolkit.

pub mod cluster;
pub mod config;
pub mod ingest;
pub mod jsonl;
pub mod keywords;
pub mod labeling;
pub mod metrics;
pub mod objective;
pub mod pipeline;
pub mod reduce;
pub mod registry;
pub mod report;
pub mod textprep;
pub mod topics;
pub mod vectors;
