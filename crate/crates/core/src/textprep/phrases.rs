//! Collocation detection: frequent adjacent pairs become `a_b` tokens.

use std::collections::HashMap;

use super::TokenDoc;

/// `(joint - min_count) * vocab_size / (count_a * count_b)`.
pub fn phrase_score(joint: usize, count_a: usize, count_b: usize, vocab_size: usize, min_count: usize) -> f64 {
    (joint as f64 - min_count as f64) * vocab_size as f64 / (count_a as f64 * count_b as f64)
}

fn phrase_pass(corpus: &[TokenDoc], min_count: usize, threshold: f64) -> Vec<TokenDoc> {
    let mut unigrams: HashMap<&str, usize> = HashMap::new();
    let mut bigrams: HashMap<(&str, &str), usize> = HashMap::new();
    for doc in corpus {
        for t in &doc.tokens {
            *unigrams.entry(t).or_default() += 1;
        }
        for w in doc.tokens.windows(2) {
            *bigrams.entry((&w[0], &w[1])).or_default() += 1;
        }
    }
    let vocab = unigrams.len();
    let joins = |a: &str, b: &str| {
        let joint = bigrams.get(&(a, b)).copied().unwrap_or(0);
        joint >= min_count
            && phrase_score(joint, unigrams[a], unigrams[b], vocab, min_count) >= threshold
    };
    corpus
        .iter()
        .map(|doc| {
            let t = &doc.tokens;
            let mut out = Vec::with_capacity(t.len());
            let mut i = 0;
            while i < t.len() {
                if i + 1 < t.len() && joins(&t[i], &t[i + 1]) {
                    out.push(format!("{}_{}", t[i], t[i + 1]));
                    i += 2;
                } else {
                    out.push(t[i].clone());
                    i += 1;
                }
            }
            TokenDoc { key: doc.key.clone(), tokens: out }
        })
        .collect()
}

/// Two greedy left-to-right joining passes; the second pass can extend a
/// bigram into a trigram.
pub fn detect_phrases(corpus: &[TokenDoc], min_count: usize, threshold: f64) -> Vec<TokenDoc> {
    let first = phrase_pass(corpus, min_count, threshold);
    phrase_pass(&first, min_count, threshold)
}
