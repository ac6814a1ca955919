use serde::{Deserialize, Serialize};

use crate::keywords::{dominant_topic, match_keywords, KeywordList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPrecision {
    pub dominant: Option<String>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub per_topic: Vec<TopicPrecision>,
    /// One entry per keyword domain, in list order; uncaptured domains are 0.
    pub per_domain: Vec<(String, f64)>,
    pub model: f64,
}

/// Precision of one topic's words against its dominant keyword domain.
/// Words matching no domain are ignored; without a dominant domain the
/// precision is 0.
pub fn topic_precision_one(words: &[String], keywords: &KeywordList) -> TopicPrecision {
    let counts = match_keywords(&words.join(" "), keywords);
    let Some(dom) = dominant_topic(&counts) else {
        return TopicPrecision { dominant: None, true_positives: 0, false_positives: 0, precision: 0.0 };
    };
    let mut tp = 0;
    let mut fp = 0;
    for w in words {
        let domains = keywords.word_domains(w);
        if domains.contains(&dom) {
            tp += 1;
        } else if !domains.is_empty() {
            fp += 1;
        }
    }
    TopicPrecision {
        dominant: Some(keywords.name(dom).to_string()),
        true_positives: tp,
        false_positives: fp,
        precision: tp as f64 / (tp + fp) as f64,
    }
}

/// Per-topic precision and the model score: the mean over all keyword
/// domains, where a domain scores the mean precision of the topics it
/// dominates, or 0 when no topic captures it.
pub fn topic_precision(topics: &[Vec<String>], keywords: &KeywordList) -> PrecisionReport {
    let per_topic: Vec<TopicPrecision> = topics.iter().map(|t| topic_precision_one(t, keywords)).collect();
    let per_domain: Vec<(String, f64)> = keywords
        .topics()
        .iter()
        .map(|d| {
            let hits: Vec<f64> = per_topic
                .iter()
                .filter(|p| p.dominant.as_deref() == Some(d.name.as_str()))
                .map(|p| p.precision)
                .collect();
            let score = if hits.is_empty() { 0.0 } else { hits.iter().sum::<f64>() / hits.len() as f64 };
            (d.name.clone(), score)
        })
        .collect();
    let model = per_domain.iter().map(|(_, s)| s).sum::<f64>() / per_domain.len().max(1) as f64;
    PrecisionReport { per_topic, per_domain, model }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn single_domain_topic() {
        let p = topic_precision_one(&words("sale revenue market demand pricing"), &KeywordList::builtin());
        assert_eq!(p.dominant.as_deref(), Some("Sales"));
        assert_eq!((p.true_positives, p.false_positives), (5, 0));
        assert_eq!(p.precision, 1.0);
    }

    #[test]
    fn mixed_topic_two_thirds() {
        let p = topic_precision_one(&words("cost expense revenue growth quarterly"), &KeywordList::builtin());
        assert_eq!(p.dominant.as_deref(), Some("Cost"));
        assert_eq!((p.true_positives, p.false_positives), (2, 1));
        assert_eq!(p.precision, 2.0 / 3.0);
    }

    #[test]
    fn no_dominant_is_zero() {
        let p = topic_precision_one(&words("cost revenue growth"), &KeywordList::builtin());
        assert_eq!(p.dominant, None);
        assert_eq!(p.precision, 0.0);
    }

    #[test]
    fn domain_averaging() {
        let kw = KeywordList::builtin();
        let perfect: Vec<Vec<String>> = kw.topics().iter().map(|d| d.keywords[..2].to_vec()).collect();
        assert_eq!(topic_precision(&perfect, &kw).model, 1.0);
        let four = &perfect[..4];
        assert!((topic_precision(four, &kw).model - 4.0 / 14.0).abs() < 1e-12);
        // two topics on one domain are averaged, not summed
        let dup = vec![words("cost expense"), words("cost expense revenue")];
        let r = topic_precision(&dup, &kw);
        assert!((r.per_domain[1].1 - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bounded_and_ignores_non_keywords(
            picks in proptest::collection::vec("(sale|revenue|cost|expense|cash|debt|lawsuit)", 1..6),
            extra in "[q-z]{3,8}",
        ) {
            let kw = KeywordList::builtin();
            prop_assume!(kw.word_domains(&extra).is_empty());
            let base = topic_precision_one(&picks, &kw);
            prop_assert!((0.0..=1.0).contains(&base.precision));
            let mut more = picks.clone();
            more.push(extra);
            prop_assert_eq!(topic_precision_one(&more, &kw).precision, base.precision);
        }
    }
}
