use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use super::TextError;

const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const BUILTIN_LEMMAS: &str = include_str!("../../data/lemmas.tsv");

/// Conservative suffix stripping for words of at least five characters:
/// plural `-ies`/`-es`/`-s`, past `-ed`, progressive `-ing`.
pub fn lemmatize_suffix(word: &str) -> String {
    let n = word.chars().count();
    if n < 5 || !word.is_ascii() {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if word.ends_with("sses") || ["xes", "ches", "shes", "zes"].iter().any(|s| word.ends_with(s)) {
        return word[..word.len() - 2].to_string();
    }
    if ["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix('s') {
        return stem.to_string();
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 4 {
            return stem.to_string();
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 3 {
            return stem.to_string();
        }
    }
    word.to_string()
}

/// Stopword removal plus dictionary-then-suffix lemmatization. Protected
/// tokens (the keyword list) always survive.
#[derive(Debug, Clone, Default)]
pub struct Normalizer {
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
    protected: BTreeSet<String>,
}

fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn parse_lemmas(text: &str) -> Result<HashMap<String, String>, TextError> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(surface), Some(lemma), None) if !surface.is_empty() && !lemma.is_empty() => {
                map.insert(surface.trim().to_lowercase(), lemma.trim().to_lowercase());
            }
            _ => {
                return Err(TextError::LemmaFormat { line: i + 1, text: line.to_string() });
            }
        }
    }
    Ok(map)
}

fn read(path: &Path) -> Result<String, TextError> {
    std::fs::read_to_string(path).map_err(|source| TextError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl Normalizer {
    pub fn new(
        stopwords: impl IntoIterator<Item = String>,
        lemmas: impl IntoIterator<Item = (String, String)>,
        protected: BTreeSet<String>,
    ) -> Self {
        Self {
            stopwords: stopwords.into_iter().collect(),
            lemmas: lemmas.into_iter().collect(),
            protected,
        }
    }

    /// Shipped stopword list and lemma table.
    pub fn builtin(protected: BTreeSet<String>) -> Self {
        Self {
            stopwords: parse_stopwords(BUILTIN_STOPWORDS),
            lemmas: parse_lemmas(BUILTIN_LEMMAS).expect("builtin lemma table is valid"),
            protected,
        }
    }

    /// Loads one or more stopword files (one entry per line) and a TSV lemma
    /// table (`surface<TAB>lemma`). Missing paths fall back to the shipped
    /// lists.
    pub fn from_files(
        stopword_files: &[impl AsRef<Path>],
        lemma_file: Option<&Path>,
        protected: BTreeSet<String>,
    ) -> Result<Self, TextError> {
        let mut n = Self::builtin(protected);
        if !stopword_files.is_empty() {
            n.stopwords.clear();
            for f in stopword_files {
                n.stopwords.extend(parse_stopwords(&read(f.as_ref())?));
            }
        }
        if let Some(path) = lemma_file {
            n.lemmas = parse_lemmas(&read(path)?)?;
        }
        Ok(n)
    }

    pub fn protected(&self) -> &BTreeSet<String> {
        &self.protected
    }

    /// Active stopwords that are not protected, sorted.
    pub fn stopword_set(&self) -> BTreeSet<String> {
        self.stopwords.iter().filter(|w| !self.protected.contains(*w)).cloned().collect()
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn lemmatize(&self, token: &str) -> String {
        match self.lemmas.get(token) {
            Some(l) => l.clone(),
            None => lemmatize_suffix(token),
        }
    }

    /// Lowercase, stopword-free, lemmatized tokens of a text.
    pub fn normalize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for raw in text.split_whitespace() {
            let token = raw
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if token.is_empty() {
                continue;
            }
            if self.protected.contains(&token) {
                out.push(token);
                continue;
            }
            if self.stopwords.contains(&token) {
                continue;
            }
            let lemma = self.lemmatize(&token);
            if self.protected.contains(&lemma) || !self.stopwords.contains(&lemma) {
                out.push(lemma);
            }
        }
        out
    }
}
