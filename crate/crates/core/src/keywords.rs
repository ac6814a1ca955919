//! Topic keyword list and the substring keyword matcher.
//!
//! A [`KeywordList`] holds the named keyword domains. Matching works per
//! whitespace-split word: a word counts once for a domain when any keyword of
//! that domain is a substring of it, so "logistic" matches "logistics" and
//! "logistical". Because a word can only count once per domain and the list
//! rejects keywords that contain other keywords, "cashflow" is a single
//! Liquidity hit rather than two.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of domains in the financial keyword list.
pub const DOMAIN_COUNT: usize = 14;

const BUILTIN_KEYWORDS: &str = include_str!("../data/keywords.toml");

#[derive(Debug, Error)]
pub enum KeywordError {
    #[error("failed to read keyword list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed keyword list: {0}")]
    Parse(String),
    #[error("duplicate topic name {0:?}")]
    DuplicateTopic(String),
    #[error("keyword {0:?} is not lowercase")]
    NotLowercase(String),
    #[error("empty keyword in topic {0:?}")]
    EmptyKeyword(String),
    #[error("keyword {inner:?} ({inner_topic}) is contained in keyword {outer:?} ({outer_topic})")]
    Collision {
        inner: String,
        inner_topic: String,
        outer: String,
        outer_topic: String,
    },
    #[error("expected {expected} topics, found {found}")]
    DomainCount { expected: usize, found: usize },
}

/// Index of a topic domain inside a [`KeywordList`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TopicId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordTopic {
    pub name: String,
    pub keywords: Vec<String>,
}

#[derive(Deserialize)]
struct KeywordFile {
    topic: Vec<KeywordTopic>,
}

/// Ordered set of keyword domains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordList {
    topics: Vec<KeywordTopic>,
}

impl KeywordList {
    /// Builds a list, enforcing unique names, lowercase keywords and the
    /// no-containment rule across the union of all keywords.
    pub fn new(topics: Vec<KeywordTopic>) -> Result<Self, KeywordError> {
        let mut names = BTreeSet::new();
        for topic in &topics {
            if !names.insert(topic.name.as_str()) {
                return Err(KeywordError::DuplicateTopic(topic.name.clone()));
            }
            for kw in &topic.keywords {
                if kw.is_empty() {
                    return Err(KeywordError::EmptyKeyword(topic.name.clone()));
                }
                if kw.to_lowercase() != *kw {
                    return Err(KeywordError::NotLowercase(kw.clone()));
                }
            }
        }
        let all: Vec<(&str, &str)> = topics
            .iter()
            .flat_map(|t| t.keywords.iter().map(move |k| (k.as_str(), t.name.as_str())))
            .collect();
        for (i, &(inner, inner_topic)) in all.iter().enumerate() {
            for (j, &(outer, outer_topic)) in all.iter().enumerate() {
                if i != j && outer.contains(inner) {
                    return Err(KeywordError::Collision {
                        inner: inner.to_string(),
                        inner_topic: inner_topic.to_string(),
                        outer: outer.to_string(),
                        outer_topic: outer_topic.to_string(),
                    });
                }
            }
        }
        Ok(Self { topics })
    }

    /// The shipped 14-domain financial keyword list.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_KEYWORDS).expect("builtin keyword list is valid")
    }

    /// Parses a `[[topic]] name = .. keywords = [..]` file. The domain count
    /// must be [`DOMAIN_COUNT`].
    pub fn from_toml_str(text: &str) -> Result<Self, KeywordError> {
        let file: KeywordFile =
            toml::from_str(text).map_err(|e| KeywordError::Parse(e.to_string()))?;
        if file.topic.len() != DOMAIN_COUNT {
            return Err(KeywordError::DomainCount {
                expected: DOMAIN_COUNT,
                found: file.topic.len(),
            });
        }
        Self::new(file.topic)
    }

    pub fn load(path: &Path) -> Result<Self, KeywordError> {
        let text = std::fs::read_to_string(path).map_err(|source| KeywordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn topics(&self) -> &[KeywordTopic] {
        &self.topics
    }

    pub fn name(&self, id: TopicId) -> &str {
        &self.topics[id.0].name
    }

    pub fn id_of(&self, name: &str) -> Option<TopicId> {
        self.topics.iter().position(|t| t.name == name).map(TopicId)
    }

    pub fn ids(&self) -> impl Iterator<Item = TopicId> {
        (0..self.topics.len()).map(TopicId)
    }

    /// True when `token` equals one of the keywords exactly.
    pub fn contains_keyword(&self, token: &str) -> bool {
        self.topics
            .iter()
            .any(|t| t.keywords.iter().any(|k| k == token))
    }

    /// All keywords as a set, used to protect tokens from filtering.
    pub fn keyword_set(&self) -> BTreeSet<String> {
        self.topics
            .iter()
            .flat_map(|t| t.keywords.iter().cloned())
            .collect()
    }

    /// Domains matched by a single word. A domain matches when one of its
    /// keywords is a substring of the word.
    pub fn word_domains(&self, word: &str) -> Vec<TopicId> {
        let lower = word.to_lowercase();
        self.topics
            .iter()
            .enumerate()
            .filter(|(_, t)| t.keywords.iter().any(|k| lower.contains(k.as_str())))
            .map(|(i, _)| TopicId(i))
            .collect()
    }

    /// First domain matched by a word, if any.
    pub fn word_domain(&self, word: &str) -> Option<TopicId> {
        self.word_domains(word).into_iter().next()
    }

    /// True when any word of the text matches any keyword.
    pub fn matches_any(&self, text: &str) -> bool {
        text.split_whitespace()
            .any(|w| !self.word_domains(w).is_empty())
    }
}

/// Per-domain keyword hit counts for one piece of text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeywordCounts(Vec<u32>);

impl KeywordCounts {
    pub fn zeros(n_topics: usize) -> Self {
        Self(vec![0; n_topics])
    }

    pub fn from_vec(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    /// Builds counts from `(name, count)` pairs against a list; unknown names
    /// are ignored.
    pub fn from_named(list: &KeywordList, pairs: &[(&str, u32)]) -> Self {
        let mut counts = Self::zeros(list.len());
        for &(name, c) in pairs {
            if let Some(id) = list.id_of(name) {
                counts.0[id.0] = c;
            }
        }
        counts
    }

    pub fn get(&self, id: TopicId) -> u32 {
        self.0[id.0]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TopicId, u32)> + '_ {
        self.0.iter().enumerate().map(|(i, &c)| (TopicId(i), c))
    }

    fn bump(&mut self, id: TopicId) {
        self.0[id.0] += 1;
    }
}

impl fmt::Display for KeywordCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Counts keyword hits per domain. Each word contributes at most one count
/// per domain.
pub fn match_keywords(sentence: &str, keywords: &KeywordList) -> KeywordCounts {
    let mut counts = KeywordCounts::zeros(keywords.len());
    for word in sentence.split_whitespace() {
        for id in keywords.word_domains(word) {
            counts.bump(id);
        }
    }
    counts
}

/// Label for a sentence: the single domain with at least two hits while every
/// other domain has none.
pub fn label_sentence(counts: &KeywordCounts) -> Option<TopicId> {
    let mut hit = counts.iter().filter(|&(_, c)| c > 0);
    let (id, c) = hit.next()?;
    if hit.next().is_some() || c < 2 {
        return None;
    }
    Some(id)
}

/// Dominant domain: at least two hits, with every other domain at most one.
/// Two qualifying domains cancel each other out.
pub fn dominant_topic(counts: &KeywordCounts) -> Option<TopicId> {
    let mut qualifying = counts.iter().filter(|&(_, c)| c >= 2);
    let (id, _) = qualifying.next()?;
    if qualifying.next().is_some() {
        return None;
    }
    Some(id)
}
