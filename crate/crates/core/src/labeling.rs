//! Single-topic sentence labels and the per-topic train/test split.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keywords::{label_sentence, match_keywords, KeywordCounts, KeywordList, TopicId};
use crate::textprep::Sentence;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("topic {topic} has {count} sentence(s), at least 2 required")]
    TopicTooSmall { topic: String, count: usize },
    #[error("train fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("unknown relaxed topic {0}")]
    UnknownTopic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub key: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub train: Vec<LabeledSentence>,
    pub test: Vec<LabeledSentence>,
    pub per_topic_counts: BTreeMap<String, SplitCounts>,
}

/// Resolves relaxed topic names against the list.
pub fn relaxed_ids(keywords: &KeywordList, names: &[String]) -> Result<BTreeSet<TopicId>, LabelError> {
    names
        .iter()
        .map(|n| keywords.id_of(n).ok_or_else(|| LabelError::UnknownTopic(n.clone())))
        .collect()
}

/// Standard label, falling back to the relaxed rule for the given topics:
/// at least one hit in the relaxed topic and at most one hit elsewhere.
/// When several relaxed topics qualify, none is chosen.
pub fn label_with_relaxation(counts: &KeywordCounts, relaxed: &BTreeSet<TopicId>) -> Option<TopicId> {
    if let Some(id) = label_sentence(counts) {
        return Some(id);
    }
    let total = counts.total();
    let mut qualifying = relaxed.iter().filter(|&&t| {
        let own = counts.get(t);
        own >= 1 && total - own <= 1
    });
    let first = *qualifying.next()?;
    qualifying.next().is_none().then_some(first)
}

/// Labels sentences and removes duplicates by cleaned text, keeping the
/// first occurrence.
pub fn build_labeled_dataset(
    sentences: &[Sentence],
    keywords: &KeywordList,
    relaxed: &BTreeSet<TopicId>,
) -> Vec<LabeledSentence> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in sentences {
        let counts = match_keywords(&s.cleaned, keywords);
        let Some(id) = label_with_relaxation(&counts, relaxed) else {
            continue;
        };
        if seen.insert(s.cleaned.clone()) {
            out.push(LabeledSentence {
                key: s.key(),
                text: s.cleaned.clone(),
                label: keywords.name(id).to_string(),
            });
        }
    }
    out
}

/// `ceil(fraction * n)`, robust to representation error in the product.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Per-topic seeded shuffle; the first `ceil(fraction * n)` sentences of
/// each topic go to train. Both halves keep dataset order.
pub fn split_topicwise(
    dataset: &[LabeledSentence],
    train_fraction: f64,
    seed: u64,
) -> Result<LabeledDataset, LabelError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(LabelError::BadFraction(train_fraction));
    }
    let mut by_topic: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.iter().enumerate() {
        by_topic.entry(&s.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; dataset.len()];
    let mut per_topic_counts = BTreeMap::new();
    for (topic, mut idx) in by_topic {
        if idx.len() < 2 {
            return Err(LabelError::TopicTooSmall { topic: topic.to_string(), count: idx.len() });
        }
        idx.shuffle(&mut rng);
        let k = train_size(idx.len(), train_fraction);
        for &i in &idx[..k] {
            in_train[i] = true;
        }
        per_topic_counts.insert(topic.to_string(), SplitCounts { train: k, test: idx.len() - k });
    }
    let (train, test): (Vec<_>, Vec<_>) = dataset.iter().cloned().zip(&in_train).partition(|(_, &t)| t);
    Ok(LabeledDataset {
        train: train.into_iter().map(|(s, _)| s).collect(),
        test: test.into_iter().map(|(s, _)| s).collect(),
        per_topic_counts,
    })
}
