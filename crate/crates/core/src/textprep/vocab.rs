//! Document frequencies, tf-idf vectors, token-extreme filtering and the
//! mean-cosine document filter.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{TextError, TokenDoc};
use crate::ingest::FunnelStage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub df: usize,
    pub cf: usize,
    /// Largest weight of the token in any L2-normalized tf-idf document vector.
    pub tfidf_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    pub n_docs: usize,
    pub entries: BTreeMap<String, VocabEntry>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }
}

/// `ln((1 + n) / (1 + df)) + 1`, positive for every df.
pub fn smooth_idf(df: usize, n_docs: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn doc_frequencies(corpus: &[TokenDoc]) -> (BTreeMap<&str, usize>, BTreeMap<&str, usize>) {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cf: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let mut seen = BTreeSet::new();
        for t in &doc.tokens {
            *cf.entry(t).or_default() += 1;
            if seen.insert(t.as_str()) {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    (df, cf)
}

/// L2-normalized tf-idf vectors as sparse `(token index, weight)` lists over
/// the corpus vocabulary in sorted token order. Empty documents get empty
/// vectors.
pub fn tfidf_vectors(corpus: &[TokenDoc]) -> (Vec<String>, Vec<Vec<(usize, f64)>>) {
    let (df, _) = doc_frequencies(corpus);
    let vocab: Vec<String> = df.keys().map(|s| s.to_string()).collect();
    let index: HashMap<&str, usize> = df.keys().enumerate().map(|(i, t)| (*t, i)).collect();
    let n = corpus.len();
    let vectors = corpus
        .iter()
        .map(|doc| {
            let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
            for t in &doc.tokens {
                *tf.entry(index[t.as_str()]).or_default() += 1;
            }
            let mut v: Vec<(usize, f64)> = tf
                .into_iter()
                .map(|(i, c)| (i, c as f64 * smooth_idf(df[vocab[i].as_str()], n)))
                .collect();
            let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|(_, w)| *w /= norm);
            }
            v
        })
        .collect();
    (vocab, vectors)
}

/// Drops tokens whose document-frequency ratio falls outside
/// `[min_df, max_df]` or whose best normalized tf-idf weight is below
/// `tfidf_floor`. Protected tokens always survive.
pub fn filter_token_extremes(
    corpus: &[TokenDoc],
    min_df: f64,
    max_df: f64,
    tfidf_floor: f64,
    protected: &BTreeSet<String>,
) -> Result<(Vec<TokenDoc>, Vocabulary), TextError> {
    for (name, v) in [("min_df", min_df), ("max_df", max_df), ("tfidf_floor", tfidf_floor)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(TextError::InvalidThreshold(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if min_df >= max_df {
        return Err(TextError::InvalidThreshold(format!("min_df {min_df} >= max_df {max_df}")));
    }
    let n = corpus.len();
    let (df, cf) = doc_frequencies(corpus);
    let (vocab, vectors) = tfidf_vectors(corpus);
    let mut best = vec![0.0f64; vocab.len()];
    for v in &vectors {
        for &(i, w) in v {
            best[i] = best[i].max(w);
        }
    }
    let mut entries = BTreeMap::new();
    for (i, token) in vocab.iter().enumerate() {
        let d = df[token.as_str()];
        let ratio = d as f64 / n as f64;
        let keep = protected.contains(token)
            || ((min_df..=max_df).contains(&ratio) && best[i] >= tfidf_floor);
        if keep {
            entries.insert(
                token.clone(),
                VocabEntry { df: d, cf: cf[token.as_str()], tfidf_norm: best[i] },
            );
        }
    }
    if entries.is_empty() {
        return Err(TextError::EmptyVocabulary);
    }
    let filtered = corpus
        .iter()
        .map(|doc| TokenDoc {
            key: doc.key.clone(),
            tokens: doc.tokens.iter().filter(|t| entries.contains_key(*t)).cloned().collect(),
        })
        .collect();
    Ok((filtered, Vocabulary { n_docs: n, entries }))
}

/// Mean cosine similarity of each document's tf-idf vector to every other
/// document, excluding itself.
pub fn mean_cosine_to_others(corpus: &[TokenDoc]) -> Vec<f64> {
    let n = corpus.len();
    if n < 2 {
        return vec![1.0; n];
    }
    let (vocab, vectors) = tfidf_vectors(corpus);
    let mut sum = vec![0.0f64; vocab.len()];
    for v in &vectors {
        for &(i, w) in v {
            sum[i] += w;
        }
    }
    vectors
        .iter()
        .map(|v| {
            let dot: f64 = v.iter().map(|&(i, w)| w * sum[i]).sum();
            let self_sim: f64 = v.iter().map(|&(_, w)| w * w).sum();
            (dot - self_sim) / (n - 1) as f64
        })
        .collect()
}

/// Keeps documents whose mean cosine similarity to all other documents is at
/// least `threshold`. Computed once over the input.
pub fn cosine_document_filter(corpus: Vec<TokenDoc>, threshold: f64) -> (Vec<TokenDoc>, FunnelStage) {
    let before = corpus.len();
    let means = mean_cosine_to_others(&corpus);
    let kept: Vec<TokenDoc> = corpus
        .into_iter()
        .zip(means)
        .filter(|(_, m)| *m >= threshold - 1e-12)
        .map(|(d, _)| d)
        .collect();
    let stage = FunnelStage {
        stage: "cosine".into(),
        kept: kept.len(),
        dropped: before - kept.len(),
    };
    (kept, stage)
}
