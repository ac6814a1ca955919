//! Evaluation: NPMI coherence, keyword topic-precision, intra- and
//! intertopic similarity, and precision-weighted scores.

mod npmi;
mod precision;
mod similarity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::count_outliers;
use crate::keywords::KeywordList;
use crate::textprep::TokenDoc;
use crate::topics::TopicRepresentation;
use crate::vectors::EmbeddingMatrix;

pub use npmi::{
    npmi_coherence, npmi_from_counts, window_count, window_counts, CoherenceConfig, CoherenceResult, WindowCounts,
};
pub use precision::{topic_precision, topic_precision_one, PrecisionReport, TopicPrecision};
pub use similarity::{intertopic_similarity, intratopic_similarity, topic_centroids, Intratopic};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("corpus yields no windows")]
    EmptyCorpus,
    #[error("no topics to score")]
    NoTopics,
    #[error("need at least 2 topics, found {0}")]
    TooFewTopics(usize),
    #[error("zero vector in topic {label}")]
    ZeroVector { label: i64 },
    #[error("{rows} embedding rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid coherence config: {0}")]
    InvalidConfig(String),
    #[error("precision {0} outside [0, 1]")]
    InvalidPrecision(f64),
    #[error("topic-precision is zero: unsuitable for financial analysis")]
    DivideByZeroPrecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Higher is better: coherence, intratopic similarity.
    Multiply,
    /// Lower is better: intertopic similarity.
    Divide,
}

pub fn weight_by_precision(raw: f64, precision: f64, kind: Weighting) -> Result<f64, MetricError> {
    if !(0.0..=1.0).contains(&precision) {
        return Err(MetricError::InvalidPrecision(precision));
    }
    match kind {
        Weighting::Multiply => Ok(raw * precision),
        Weighting::Divide if precision == 0.0 => Err(MetricError::DivideByZeroPrecision),
        Weighting::Divide => Ok(raw / precision),
    }
}

/// Table cell `weighted (raw)` at three decimals; an undefined weighted
/// value prints as `inf`.
pub fn format_cell(weighted: Option<f64>, raw: f64) -> String {
    match weighted {
        Some(w) => format!("{w:.3} ({raw:.3})"),
        None => format!("inf ({raw:.3})"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub id: i64,
    pub words: Vec<String>,
    pub dominant: Option<String>,
    pub topic_precision: f64,
    pub npmi: f64,
    pub intratopic: Option<f64>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub topic_precision: f64,
    pub npmi_raw: f64,
    pub npmi_weighted: f64,
    pub intratopic_raw: f64,
    pub intratopic_weighted: f64,
    pub intertopic_raw: f64,
    /// `None` when topic-precision is zero.
    pub intertopic_weighted: Option<f64>,
    pub outlier_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub topics: Vec<TopicMetrics>,
    pub per_domain_precision: Vec<(String, f64)>,
    pub model: ModelMetrics,
}

impl ModelMetrics {
    pub fn new(
        topic_precision: f64,
        npmi_raw: f64,
        intratopic_raw: f64,
        intertopic_raw: f64,
        outlier_count: usize,
    ) -> Result<Self, MetricError> {
        let intertopic_weighted = match weight_by_precision(intertopic_raw, topic_precision, Weighting::Divide) {
            Ok(w) => Some(w),
            Err(MetricError::DivideByZeroPrecision) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            topic_precision,
            npmi_raw,
            npmi_weighted: weight_by_precision(npmi_raw, topic_precision, Weighting::Multiply)?,
            intratopic_raw,
            intratopic_weighted: weight_by_precision(intratopic_raw, topic_precision, Weighting::Multiply)?,
            intertopic_raw,
            intertopic_weighted,
            outlier_count,
        })
    }

    /// Checks the weighting identities to `tol`.
    pub fn weighting_consistent(&self, tol: f64) -> bool {
        let p = self.topic_precision;
        let inter = match self.intertopic_weighted {
            Some(w) => (w * p - self.intertopic_raw).abs() <= tol,
            None => p == 0.0,
        };
        (self.npmi_weighted - self.npmi_raw * p).abs() <= tol
            && (self.intratopic_weighted - self.intratopic_raw * p).abs() <= tol
            && inter
    }
}

/// Scores one topic model: coherence of the topic words against `corpus`,
/// keyword precision, and embedding similarity of the labeled rows.
pub fn evaluate(
    topics: &TopicRepresentation,
    labels: &[i64],
    corpus: &[TokenDoc],
    embeddings: &EmbeddingMatrix,
    keywords: &KeywordList,
    cfg: &CoherenceConfig,
) -> Result<MetricsReport, MetricError> {
    let words = topics.word_lists();
    let coherence = npmi_coherence(&words, corpus, cfg)?;
    let precision = topic_precision(&words, keywords);
    let intra = intratopic_similarity(embeddings, labels)?;
    let inter = intertopic_similarity(embeddings, labels)?;
    let per_topic = topics
        .topics
        .iter()
        .zip(words)
        .zip(coherence.per_topic.iter().zip(&precision.per_topic))
        .map(|((t, words), (&npmi, p))| TopicMetrics {
            id: t.id,
            words,
            dominant: p.dominant.clone(),
            topic_precision: p.precision,
            npmi,
            intratopic: intra.per_topic.iter().find(|(l, _)| *l == t.id).map(|&(_, s)| s),
            size: labels.iter().filter(|&&l| l == t.id).count(),
        })
        .collect();
    Ok(MetricsReport {
        topics: per_topic,
        per_domain_precision: precision.per_domain,
        model: ModelMetrics::new(precision.model, coherence.mean, intra.mean, inter, count_outliers(labels))?,
    })
}

/// CSV with one row per metric and one `weighted (raw)` column per run.
pub fn metrics_table(columns: &[(String, ModelMetrics)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric".to_string()];
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    w.write_record(&header).expect("in-memory write");
    type Row = (&'static str, fn(&ModelMetrics) -> String);
    let rows: [Row; 5] = [
        ("npmi_coherence", |m| format_cell(Some(m.npmi_weighted), m.npmi_raw)),
        ("intratopic_similarity", |m| format_cell(Some(m.intratopic_weighted), m.intratopic_raw)),
        ("intertopic_similarity", |m| format_cell(m.intertopic_weighted, m.intertopic_raw)),
        ("topic_precision", |m| format!("{:.3}", m.topic_precision)),
        ("outliers", |m| m.outlier_count.to_string()),
    ];
    for (name, cell) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(columns.iter().map(|(_, m)| cell(m)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to Vec")).expect("csv output is UTF-8")
}
