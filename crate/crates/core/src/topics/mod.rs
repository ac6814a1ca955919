//! Topic representations: class-based tf-idf over cluster assignments and
//! the NMF baseline.

mod ctfidf;
mod nmf;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::NOISE;
use crate::textprep::TokenDoc;

pub use ctfidf::{build_class_counts, ctfidf, ClassTermCounts, ClassWeights, CtfidfModel};
pub use nmf::{grid_search_k, nmf_fit, GridSearch, NmfFactors, NmfModel, NmfParams};

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeInput { row: usize, col: usize, value: f64 },
    #[error("rank {k} must be positive and below min(rows, cols) = {limit}")]
    BadRank { k: usize, limit: usize },
    #[error("no candidate ranks given")]
    NoCandidates,
    #[error("{docs} token docs but {labels} labels")]
    LengthMismatch { docs: usize, labels: usize },
    #[error("nothing to model: {0}")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicWord {
    pub token: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: i64,
    pub words: Vec<TopicWord>,
    /// Fewer than `k` positively weighted tokens were available.
    pub short: bool,
}

impl Topic {
    pub fn tokens(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.token.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopicRepresentation {
    pub topics: Vec<Topic>,
}

impl TopicRepresentation {
    pub fn word_lists(&self) -> Vec<Vec<String>> {
        self.topics
            .iter()
            .map(|t| t.words.iter().map(|w| w.token.clone()).collect())
            .collect()
    }
}

/// The `k` highest-weighted tokens, ties broken by token order. Only
/// positive weights qualify.
pub fn top_k_from<'a>(weights: impl IntoIterator<Item = (&'a str, f64)>, k: usize) -> (Vec<TopicWord>, bool) {
    let mut w: Vec<(&str, f64)> = weights.into_iter().filter(|&(_, x)| x > 0.0).collect();
    w.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let short = w.len() < k;
    let words = w.into_iter().take(k).map(|(t, x)| TopicWord { token: t.to_string(), weight: x }).collect();
    (words, short)
}

/// Per-class top-`k` words from a class weight table.
pub fn top_k_words(weights: &ClassWeights, k: usize) -> TopicRepresentation {
    let topics = weights
        .classes
        .iter()
        .zip(&weights.weights)
        .map(|(&id, row)| {
            let (words, short) = top_k_from(weights.vocab.iter().map(String::as_str).zip(row.iter().copied()), k);
            Topic { id, words, short }
        })
        .collect();
    TopicRepresentation { topics }
}

/// Token-count matrix, one row per document, over tokens reaching
/// `min_df` documents.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub vocab: Vec<String>,
    pub counts: DMatrix<f64>,
}

pub fn doc_term_matrix(docs: &[TokenDoc], min_df: usize) -> DocTermMatrix {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        let unique: BTreeSet<&str> = d.tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let vocab: Vec<String> = df.iter().filter(|(_, &c)| c >= min_df).map(|(t, _)| t.to_string()).collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut counts = DMatrix::zeros(docs.len(), vocab.len());
    for (r, d) in docs.iter().enumerate() {
        for t in &d.tokens {
            if let Some(&c) = index.get(t.as_str()) {
                counts[(r, c)] += 1.0;
            }
        }
    }
    DocTermMatrix { vocab, counts }
}

/// Topic words plus a per-document topic label ([`NOISE`] when unassigned).
#[derive(Debug, Clone, PartialEq)]
pub struct TopicFit {
    pub topics: TopicRepresentation,
    pub labels: Vec<i64>,
}

/// A topic-modelling strategy. `labels` carries cluster assignments for
/// models that represent given clusters; others may ignore it.
pub trait TopicModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, docs: &[TokenDoc], labels: &[i64]) -> Result<TopicFit, TopicError>;
}

pub(crate) fn non_noise(labels: &[i64]) -> BTreeSet<i64> {
    labels.iter().copied().filter(|&l| l != NOISE).collect()
}
