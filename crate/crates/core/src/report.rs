//! Report files: the metrics table, per-topic wordcloud weights tagged with
//! keyword domains, and the document funnel.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ingest::FunnelReport;
use crate::jsonl::write_json;
use crate::keywords::KeywordList;
use crate::metrics::{metrics_table, MetricsReport};
use crate::topics::TopicRepresentation;

/// Tag for tokens outside the keyword list.
pub const NO_DOMAIN: &str = "none";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordcloudEntry {
    pub token: String,
    pub weight: f64,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordcloudTopic {
    pub id: i64,
    pub words: Vec<WordcloudEntry>,
}

/// Topic words with their weights and the first keyword domain each token
/// matches.
pub fn wordcloud(topics: &TopicRepresentation, keywords: &KeywordList) -> Vec<WordcloudTopic> {
    topics
        .topics
        .iter()
        .map(|t| WordcloudTopic {
            id: t.id,
            words: t
                .words
                .iter()
                .map(|w| WordcloudEntry {
                    token: w.token.clone(),
                    weight: w.weight,
                    domain: keywords.word_domain(&w.token).map_or(NO_DOMAIN, |d| keywords.name(d)).to_string(),
                })
                .collect(),
        })
        .collect()
}

pub const METRICS_CSV: &str = "metrics.csv";
pub const WORDCLOUD_JSON: &str = "wordcloud.json";
pub const FUNNEL_JSON: &str = "funnel.json";

/// Writes the three report files into `dir`; `column` names the metrics
/// table column. Returns the written paths.
pub fn emit_report(
    dir: &Path,
    column: &str,
    metrics: &MetricsReport,
    topics: &TopicRepresentation,
    funnel: &FunnelReport,
    keywords: &KeywordList,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(METRICS_CSV);
    std::fs::write(&csv, metrics_table(&[(column.to_string(), metrics.model.clone())]))?;
    let cloud = dir.join(WORDCLOUD_JSON);
    write_json(&cloud, &wordcloud(topics, keywords))?;
    let fun = dir.join(FUNNEL_JSON);
    write_json(&fun, funnel)?;
    Ok(vec![csv, cloud, fun])
}
