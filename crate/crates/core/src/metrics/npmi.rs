use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::textprep::TokenDoc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub window_size: usize,
    pub top_k: usize,
    pub epsilon: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self { window_size: 20, top_k: 5, epsilon: 1e-12 }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.window_size < 2 || self.top_k < 2 || !(self.epsilon > 0.0) {
            return Err(MetricError::InvalidConfig(format!(
                "window_size {} and top_k {} must be >= 2, epsilon {} positive",
                self.window_size, self.top_k, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Boolean window counts for a fixed set of words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowCounts {
    pub windows: u64,
    pub single: BTreeMap<String, u64>,
    /// Keyed by the lexicographically ordered pair.
    pub joint: BTreeMap<(String, String), u64>,
}

impl WindowCounts {
    pub fn single(&self, w: &str) -> u64 {
        self.single.get(w).copied().unwrap_or(0)
    }

    pub fn joint(&self, a: &str, b: &str) -> u64 {
        let key = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.joint.get(&key).copied().unwrap_or(0)
    }
}

/// Number of windows a document of `len` tokens yields: none when empty,
/// one when shorter than the window, `len - size + 1` otherwise.
pub fn window_count(len: usize, size: usize) -> usize {
    match len {
        0 => 0,
        l if l <= size => 1,
        l => l - size + 1,
    }
}

#[derive(Default)]
struct Partial {
    windows: u64,
    single: Vec<u64>,
    joint: HashMap<(usize, usize), u64>,
}

fn count_doc(tokens: &[String], index: &HashMap<&str, usize>, size: usize) -> Partial {
    let ids: Vec<Option<usize>> = tokens.iter().map(|t| index.get(t.as_str()).copied()).collect();
    let mut p = Partial { single: vec![0; index.len()], ..Default::default() };
    let n = window_count(ids.len(), size);
    if n == 0 {
        return p;
    }
    let width = size.min(ids.len());
    let mut inside = vec![0u32; index.len()];
    for id in ids[..width].iter().flatten() {
        inside[*id] += 1;
    }
    for start in 0..n {
        if start > 0 {
            if let Some(out) = ids[start - 1] {
                inside[out] -= 1;
            }
            if let Some(inn) = ids[start + width - 1] {
                inside[inn] += 1;
            }
        }
        let present: Vec<usize> = (0..inside.len()).filter(|&i| inside[i] > 0).collect();
        for (a, &i) in present.iter().enumerate() {
            p.single[i] += 1;
            for &j in &present[a + 1..] {
                *p.joint.entry((i, j)).or_default() += 1;
            }
        }
    }
    p.windows = n as u64;
    p
}

/// Sliding-window (step 1) document counts for `words`. Documents are
/// counted in parallel and merged.
pub fn window_counts(corpus: &[TokenDoc], words: &BTreeSet<String>, size: usize) -> WindowCounts {
    let vocab: Vec<&str> = words.iter().map(String::as_str).collect();
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let total = corpus
        .par_iter()
        .map(|d| count_doc(&d.tokens, &index, size))
        .reduce(
            || Partial { single: vec![0; vocab.len()], ..Default::default() },
            |mut a, b| {
                a.windows += b.windows;
                a.single.iter_mut().zip(&b.single).for_each(|(x, y)| *x += y);
                for (k, v) in b.joint {
                    *a.joint.entry(k).or_default() += v;
                }
                a
            },
        );
    WindowCounts {
        windows: total.windows,
        single: vocab.iter().zip(&total.single).map(|(w, &c)| (w.to_string(), c)).collect(),
        joint: total
            .joint
            .into_iter()
            .map(|((i, j), c)| ((vocab[i].to_string(), vocab[j].to_string()), c))
            .collect(),
    }
}

/// NPMI from raw counts. A word with no windows gives -1; a pair present in
/// every window gives 1.
pub fn npmi_from_counts(joint: u64, a: u64, b: u64, windows: u64, epsilon: f64) -> f64 {
    if a == 0 || b == 0 || windows == 0 {
        return -1.0;
    }
    let n = windows as f64;
    let pij = joint as f64 / n + epsilon;
    if pij >= 1.0 {
        return 1.0;
    }
    let pi = a as f64 / n;
    let pj = b as f64 / n;
    ((pij / (pi * pj)).ln() / -pij.ln()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub per_topic: Vec<f64>,
    pub mean: f64,
    /// Topic words that never occur in the corpus.
    pub missing: Vec<String>,
}

/// Per topic, the mean NPMI over all unordered pairs of its first `top_k`
/// words; the model score is the mean over topics.
pub fn npmi_coherence(
    topics: &[Vec<String>],
    corpus: &[TokenDoc],
    cfg: &CoherenceConfig,
) -> Result<CoherenceResult, MetricError> {
    cfg.validate()?;
    if topics.is_empty() {
        return Err(MetricError::NoTopics);
    }
    let words: BTreeSet<String> = topics.iter().flat_map(|t| t.iter().take(cfg.top_k).cloned()).collect();
    let counts = window_counts(corpus, &words, cfg.window_size);
    if counts.windows == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    let missing = words.iter().filter(|w| counts.single(w) == 0).cloned().collect();
    let per_topic: Vec<f64> = topics
        .iter()
        .map(|t| {
            let t = &t[..t.len().min(cfg.top_k)];
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..t.len() {
                for j in i + 1..t.len() {
                    let (a, b) = (&t[i], &t[j]);
                    sum += npmi_from_counts(
                        counts.joint(a, b),
                        counts.single(a),
                        counts.single(b),
                        counts.windows,
                        cfg.epsilon,
                    );
                    pairs += 1;
                }
            }
            if pairs == 0 { 0.0 } else { sum / pairs as f64 }
        })
        .collect();
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(CoherenceResult { per_topic, mean, missing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(text: &str) -> TokenDoc {
        TokenDoc { key: String::new(), tokens: text.split_whitespace().map(String::from).collect() }
    }

    fn topics(list: &[&[&str]]) -> Vec<Vec<String>> {
        list.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn cfg(window: usize) -> CoherenceConfig {
        CoherenceConfig { window_size: window, top_k: 5, epsilon: 1e-12 }
    }

    #[test]
    fn always_together_is_one() {
        let corpus = [doc("cash debt x y"), doc("z cash debt"), doc("q r s")];
        let r = npmi_coherence(&topics(&[&["cash", "debt"]]), &corpus, &cfg(10)).unwrap();
        assert!((r.per_topic[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn never_together_near_minus_one() {
        let corpus = [doc("cash a b"), doc("debt c d"), doc("e f g")];
        let mut last = 0.0;
        for eps in [1e-6, 1e-12, 1e-50, 1e-300] {
            let c = CoherenceConfig { epsilon: eps, ..cfg(10) };
            let r = npmi_coherence(&topics(&[&["cash", "debt"]]), &corpus, &c).unwrap().per_topic[0];
            assert!(r < last && r >= -1.0);
            last = r;
        }
        assert!(last < -0.99, "{last}");
    }

    #[test]
    fn missing_word_flagged() {
        let corpus = [doc("cash a b")];
        let r = npmi_coherence(&topics(&[&["cash", "ghost"]]), &corpus, &cfg(10)).unwrap();
        assert_eq!(r.per_topic[0], -1.0);
        assert_eq!(r.missing, ["ghost"]);
    }

    #[test]
    fn window_counting_by_hand() {
        // windows of 2 over "a b a c": [a b] [b a] [a c]
        let c = window_counts(&[doc("a b a c")], &["a", "b", "c"].iter().map(|s| s.to_string()).collect(), 2);
        assert_eq!(c.windows, 3);
        assert_eq!(c.single("a"), 3);
        assert_eq!(c.single("b"), 2);
        assert_eq!(c.joint("b", "a"), 2);
        assert_eq!(c.joint("a", "c"), 1);
        assert_eq!(c.joint("b", "c"), 0);
        assert_eq!(window_count(0, 5), 0);
        assert_eq!(window_count(3, 5), 1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            npmi_coherence(&topics(&[&["a", "b"]]), &[doc("")], &cfg(10)),
            Err(MetricError::EmptyCorpus)
        );
        assert!(matches!(
            npmi_coherence(&topics(&[&["a", "b"]]), &[doc("a")], &cfg(1)),
            Err(MetricError::InvalidConfig(_))
        ));
    }

    #[test]
    fn independent_words_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let vocab = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
        let corpus: Vec<TokenDoc> = (0..100)
            .map(|_| TokenDoc {
                key: String::new(),
                tokens: (0..1019).map(|_| vocab[rng.gen_range(0..vocab.len())].to_string()).collect(),
            })
            .collect();
        // 100 docs x 1000 windows of 20
        let r = npmi_coherence(&topics(&[&["a", "b", "c"]]), &corpus, &cfg(20)).unwrap();
        assert!(r.mean.abs() < 0.05, "{}", r.mean);
    }
}
