use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{non_noise, top_k_words, TopicError, TopicFit, TopicModel};
use crate::cluster::NOISE;
use crate::textprep::TokenDoc;

/// Token counts per cluster over a shared vocabulary. Noise is excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTermCounts {
    pub vocab: Vec<String>,
    pub classes: Vec<i64>,
    /// `counts[class][token]`
    pub counts: Vec<Vec<f64>>,
}

impl ClassTermCounts {
    pub fn get(&self, class: i64, token: &str) -> f64 {
        let c = self.classes.iter().position(|&x| x == class);
        let t = self.vocab.binary_search_by(|v| v.as_str().cmp(token)).ok();
        match (c, t) {
            (Some(c), Some(t)) => self.counts[c][t],
            _ => 0.0,
        }
    }
}

/// Per-class token counts. Stopwords and tokens found in fewer than
/// `min_df` non-noise documents are left out.
pub fn build_class_counts(
    docs: &[TokenDoc],
    labels: &[i64],
    is_stopword: impl Fn(&str) -> bool,
    min_df: usize,
) -> Result<ClassTermCounts, TopicError> {
    if docs.len() != labels.len() {
        return Err(TopicError::LengthMismatch { docs: docs.len(), labels: labels.len() });
    }
    let kept = || docs.iter().zip(labels).filter(|(_, &l)| l != NOISE);
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (d, _) in kept() {
        let unique: BTreeSet<&str> = d.tokens.iter().map(String::as_str).collect();
        for t in unique.into_iter().filter(|t| !is_stopword(t)) {
            *df.entry(t).or_default() += 1;
        }
    }
    let vocab: Vec<String> = df.iter().filter(|(_, &c)| c >= min_df).map(|(t, _)| t.to_string()).collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let classes: Vec<i64> = non_noise(labels).into_iter().collect();
    let mut counts = vec![vec![0.0; vocab.len()]; classes.len()];
    for (d, l) in kept() {
        let c = classes.binary_search(l).expect("label collected above");
        for t in &d.tokens {
            if let Some(&i) = index.get(t.as_str()) {
                counts[c][i] += 1.0;
            }
        }
    }
    Ok(ClassTermCounts { vocab, classes, counts })
}

/// Weighted class-token table with the same layout as [`ClassTermCounts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub vocab: Vec<String>,
    pub classes: Vec<i64>,
    pub weights: Vec<Vec<f64>>,
}

impl ClassWeights {
    pub fn get(&self, class: i64, token: &str) -> f64 {
        let c = self.classes.iter().position(|&x| x == class);
        let t = self.vocab.binary_search_by(|v| v.as_str().cmp(token)).ok();
        match (c, t) {
            (Some(c), Some(t)) => self.weights[c][t],
            _ => 0.0,
        }
    }
}

/// `W[c][t] = tf[c][t] * ln(1 + A / f_t)` with `A` the mean token count per
/// class and `f_t` the token's total count. With `reduce_frequent`, `tf` is
/// first replaced by `sqrt(tf * A / f_t)`. Seed tokens are then scaled by
/// `seed_multiplier`.
pub fn ctfidf(
    counts: &ClassTermCounts,
    seeds: &BTreeSet<String>,
    seed_multiplier: f64,
    reduce_frequent: bool,
) -> ClassWeights {
    let n_classes = counts.classes.len().max(1) as f64;
    let total: f64 = counts.counts.iter().flatten().sum();
    let avg = total / n_classes;
    let f: Vec<f64> = (0..counts.vocab.len())
        .map(|t| counts.counts.iter().map(|row| row[t]).sum())
        .collect();
    let boost: Vec<f64> = counts
        .vocab
        .iter()
        .map(|t| if seeds.contains(t) { seed_multiplier } else { 1.0 })
        .collect();
    let weights = counts
        .counts
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(t, &tf)| {
                    if f[t] == 0.0 {
                        return 0.0;
                    }
                    let tf = if reduce_frequent { (tf * avg / f[t]).sqrt() } else { tf };
                    tf * (1.0 + avg / f[t]).ln() * boost[t]
                })
                .collect()
        })
        .collect();
    ClassWeights { vocab: counts.vocab.clone(), classes: counts.classes.clone(), weights }
}

/// c-TF-IDF representation of given cluster assignments.
#[derive(Debug, Clone)]
pub struct CtfidfModel {
    pub stopwords: BTreeSet<String>,
    pub seeds: BTreeSet<String>,
    pub seed_multiplier: f64,
    pub reduce_frequent: bool,
    pub min_df: usize,
    pub top_k: usize,
}

impl TopicModel for CtfidfModel {
    fn name(&self) -> &'static str {
        "ctfidf"
    }

    fn fit(&self, docs: &[TokenDoc], labels: &[i64]) -> Result<TopicFit, TopicError> {
        let counts = build_class_counts(docs, labels, |t| self.stopwords.contains(t), self.min_df)?;
        if counts.classes.is_empty() {
            return Err(TopicError::Empty("every document is noise".into()));
        }
        let weights = ctfidf(&counts, &self.seeds, self.seed_multiplier, self.reduce_frequent);
        Ok(TopicFit { topics: top_k_words(&weights, self.top_k), labels: labels.to_vec() })
    }
}
