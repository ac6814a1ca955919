//! Sentence segmentation, cleaning, token normalization and the
//! document-level vocabulary filters.

mod clean;
mod normalize;
mod phrases;
mod segment;
mod vocab;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{count_words, Document, FunnelStage};
use crate::keywords::KeywordList;

pub use clean::clean_sentence;
pub use normalize::{lemmatize_suffix, Normalizer};
pub use phrases::{detect_phrases, phrase_score};
pub use segment::segment_text;
pub use vocab::{
    cosine_document_filter, filter_token_extremes, mean_cosine_to_others, smooth_idf, tfidf_vectors,
    VocabEntry, Vocabulary,
};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("no token survived the vocabulary filters")]
    EmptyVocabulary,
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed lemma table line {line}: {text:?}")]
    LemmaFormat { line: usize, text: String },
}

/// One sentence of a document, before and after cleaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub raw: String,
    pub cleaned: String,
    pub word_count: usize,
}

impl Sentence {
    pub fn new(doc_id: impl Into<String>, index: usize, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let cleaned = clean_sentence(&raw);
        Self {
            doc_id: doc_id.into(),
            index,
            word_count: count_words(&cleaned),
            raw,
            cleaned,
        }
    }

    /// Stable identifier, `doc_id#index`.
    pub fn key(&self) -> String {
        sentence_key(&self.doc_id, self.index)
    }
}

pub fn sentence_key(doc_id: &str, index: usize) -> String {
    format!("{doc_id}#{index}")
}

/// Normalized token sequence of a document or sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub key: String,
    pub tokens: Vec<String>,
}

/// Splits a document into cleaned sentences.
pub fn segment_sentences(doc: &Document) -> Vec<Sentence> {
    segment_text(&doc.text)
        .into_iter()
        .enumerate()
        .map(|(i, raw)| Sentence::new(doc.id.clone(), i, raw))
        .collect()
}

/// Keeps sentences with `min..=max` cleaned words.
pub fn filter_sentence_length(sents: Vec<Sentence>, min: usize, max: usize) -> Vec<Sentence> {
    sents
        .into_iter()
        .filter(|s| (min..=max).contains(&s.word_count))
        .collect()
}

/// Keeps every sentence that contains a keyword plus its immediate
/// neighbours (index -1 and +1 in the same document). Input order is kept.
pub fn refine_sentences_by_keyword(sents: Vec<Sentence>, keywords: &KeywordList) -> Vec<Sentence> {
    let hits: BTreeSet<(String, usize)> = sents
        .iter()
        .filter(|s| keywords.matches_any(&s.cleaned))
        .map(|s| (s.doc_id.clone(), s.index))
        .collect();
    let near = |s: &Sentence| {
        let at = |i: usize| hits.contains(&(s.doc_id.clone(), i));
        at(s.index) || (s.index > 0 && at(s.index - 1)) || at(s.index + 1)
    };
    let mut seen = BTreeSet::new();
    sents
        .into_iter()
        .filter(|s| near(s) && seen.insert((s.doc_id.clone(), s.index)))
        .collect()
}

/// Thresholds for the document-level preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocFilterParams {
    pub phrase_min_count: usize,
    pub phrase_threshold: f64,
    pub min_df: f64,
    pub max_df: f64,
    pub tfidf_floor: f64,
    pub cosine_floor: f64,
}

impl Default for DocFilterParams {
    fn default() -> Self {
        Self {
            phrase_min_count: 5,
            phrase_threshold: 10.0,
            min_df: 0.02,
            max_df: 0.99,
            tfidf_floor: 0.1,
            cosine_floor: 0.6,
        }
    }
}

/// Whole-document chain: normalize, join phrases, drop extreme tokens, then
/// drop documents with low mean cosine similarity to the rest. Returns the
/// token docs of the kept documents (keyed by document id) and the cosine
/// funnel stage.
pub fn prepare_documents(
    docs: &[Document],
    normalizer: &Normalizer,
    params: &DocFilterParams,
) -> Result<(Vec<TokenDoc>, FunnelStage), TextError> {
    use rayon::prelude::*;
    let corpus: Vec<TokenDoc> = docs
        .par_iter()
        .map(|d| TokenDoc {
            key: d.id.clone(),
            tokens: normalizer.normalize(&clean_sentence(&d.text)),
        })
        .collect();
    let corpus = detect_phrases(&corpus, params.phrase_min_count, params.phrase_threshold);
    let (corpus, _vocab) = filter_token_extremes(
        &corpus,
        params.min_df,
        params.max_df,
        params.tfidf_floor,
        normalizer.protected(),
    )?;
    Ok(cosine_document_filter(corpus, params.cosine_floor))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(doc: &str, index: usize, text: &str) -> Sentence {
        Sentence::new(doc, index, text)
    }

    #[test]
    fn sentence_fields() {
        let s = sent("d1", 3, "We don't expect 2022 growth.");
        assert_eq!(s.cleaned, "we do not expect growth");
        assert_eq!(s.word_count, 5);
        assert_eq!(s.key(), "d1#3");
    }

    #[test]
    fn length_filter_bounds() {
        let four = sent("d", 0, "one two three four");
        let five = sent("d", 1, "one two three four five");
        let long = sent("d", 2, &vec!["word"; 51].join(" "));
        let fifty = sent("d", 3, &vec!["word"; 50].join(" "));
        let kept = filter_sentence_length(vec![four, five, long, fifty], 5, 50);
        let idx: Vec<_> = kept.iter().map(|s| s.index).collect();
        assert_eq!(idx, [1, 3]);
    }

    #[test]
    fn refine_keeps_neighbours() {
        let kw = KeywordList::builtin();
        let texts = [
            "the weather was nice",
            "nothing to see here",
            "revenue rose sharply",
            "birds were singing",
            "the sky was blue",
        ];
        let sents: Vec<_> = texts.iter().enumerate().map(|(i, t)| sent("d", i, t)).collect();
        let kept = refine_sentences_by_keyword(sents, &kw);
        let idx: Vec<_> = kept.iter().map(|s| s.index).collect();
        assert_eq!(idx, [1, 2, 3]);
    }

    #[test]
    fn refine_at_document_start() {
        let kw = KeywordList::builtin();
        let texts = ["revenue rose", "birds sang", "the sky was blue"];
        let mut sents: Vec<_> = texts.iter().enumerate().map(|(i, t)| sent("a", i, t)).collect();
        sents.push(sent("b", 0, "clouds drifted by"));
        let kept = refine_sentences_by_keyword(sents, &kw);
        let keys: Vec<_> = kept.iter().map(|s| s.key()).collect();
        assert_eq!(keys, ["a#0", "a#1"]);
    }

    #[test]
    fn refine_is_subset_with_adjacency() {
        let kw = KeywordList::builtin();
        let words = ["cost", "bird", "tree", "cloud", "revenue", "lake", "debt"];
        let mut sents = Vec::new();
        for d in 0..4 {
            for i in 0..12 {
                let w = words[(d * 5 + i * 3) % words.len()];
                sents.push(sent(&format!("d{d}"), i, &format!("the {w} moved")));
            }
        }
        let kept = refine_sentences_by_keyword(sents.clone(), &kw);
        for s in &kept {
            assert!(sents.contains(s));
            if !kw.matches_any(&s.cleaned) {
                assert!(kept.iter().chain(sents.iter()).any(|o| o.doc_id == s.doc_id
                    && kw.matches_any(&o.cleaned)
                    && (o.index + 1 == s.index || s.index + 1 == o.index)));
            }
        }
    }
}
