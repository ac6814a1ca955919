//! Filing ingestion: Item 7 extraction and document-level filters.
//!
//! Every filter returns its kept documents together with a [`FunnelStage`]
//! so the caller can fold the stages into a [`FunnelReport`].

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use log::warn;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("filing {0}: no Item 7 heading found")]
    NoItem7Found(String),
    #[error("filing {0}: no Item 8 heading after Item 7")]
    NoItem8AfterItem7(String),
    #[error("filing {id}: invalid fiscal year {year}")]
    InvalidYear { id: String, year: i32 },
    #[error("filing {0}: empty body")]
    EmptyBody(String),
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A filing after the upstream HTML-stripping parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawFiling {
    pub id: String,
    pub fiscal_year: i32,
    pub body: String,
}

impl RawFiling {
    pub fn new(
        id: impl Into<String>,
        fiscal_year: i32,
        body: impl Into<String>,
    ) -> Result<Self, IngestError> {
        let id = id.into();
        let body = body.into();
        if !(1000..=9999).contains(&fiscal_year) {
            return Err(IngestError::InvalidYear { id, year: fiscal_year });
        }
        if body.trim().is_empty() {
            return Err(IngestError::EmptyBody(id));
        }
        Ok(Self { id, fiscal_year, body })
    }
}

/// The Item 7 + 7A span of one filing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub fiscal_year: i32,
    pub text: String,
    pub word_count: usize,
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStage {
    pub stage: String,
    pub kept: usize,
    pub dropped: usize,
}

/// Per-stage kept/dropped document accounting.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FunnelReport {
    pub input: usize,
    pub stages: Vec<FunnelStage>,
}

impl FunnelReport {
    pub fn new(input: usize) -> Self {
        Self { input, stages: Vec::new() }
    }

    /// Appends a stage. Panics if the stage does not start from the previous
    /// stage's kept count.
    pub fn push(&mut self, stage: FunnelStage) {
        assert_eq!(
            stage.kept + stage.dropped,
            self.remaining(),
            "funnel stage {} does not telescope",
            stage.stage
        );
        self.stages.push(stage);
    }

    pub fn remaining(&self) -> usize {
        self.stages.last().map_or(self.input, |s| s.kept)
    }

    pub fn total_dropped(&self) -> usize {
        self.stages.iter().map(|s| s.dropped).sum()
    }

    /// The document counts after each stage, starting with the input count.
    pub fn trajectory(&self) -> Vec<usize> {
        std::iter::once(self.input)
            .chain(self.stages.iter().map(|s| s.kept))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeadingKind {
    Item7,
    Item7A,
    Item8,
}

fn heading_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?im)^[ \t]*item[\s.:\-]*(7a|7|8)\b").expect("heading pattern compiles")
    })
}

fn headings(body: &str) -> Vec<(usize, HeadingKind)> {
    heading_regex()
        .captures_iter(body)
        .map(|c| {
            let start = c.get(0).unwrap().start();
            let kind = match c[1].to_ascii_lowercase().as_str() {
                "7a" => HeadingKind::Item7A,
                "7" => HeadingKind::Item7,
                _ => HeadingKind::Item8,
            };
            // start of the "item" token, not of leading indentation
            let lead = body[start..].len() - body[start..].trim_start().len();
            (start + lead, kind)
        })
        .collect()
}

/// Extracts the text from the chosen Item 7 heading up to the next Item 8
/// heading. Headings must start a line. Table-of-contents entries come first
/// in a filing, so the last Item 7 that is still followed by an Item 8 wins.
/// The Item 7 heading line is kept in the extracted text.
pub fn extract_item7(filing: &RawFiling) -> Result<Document, IngestError> {
    let hs = headings(&filing.body);
    let item7: Vec<usize> = hs
        .iter()
        .filter(|(_, k)| *k == HeadingKind::Item7)
        .map(|(p, _)| *p)
        .collect();
    if item7.is_empty() {
        return Err(IngestError::NoItem7Found(filing.id.clone()));
    }
    let item8: Vec<usize> = hs
        .iter()
        .filter(|(_, k)| *k == HeadingKind::Item8)
        .map(|(p, _)| *p)
        .collect();
    let start = item7
        .iter()
        .rev()
        .copied()
        .find(|&s| item8.iter().any(|&e| e > s))
        .ok_or_else(|| IngestError::NoItem8AfterItem7(filing.id.clone()))?;
    let end = item8.iter().copied().find(|&e| e > start).unwrap();
    let text = filing.body[start..end].trim().to_string();
    Ok(Document {
        id: filing.id.clone(),
        fiscal_year: filing.fiscal_year,
        word_count: count_words(&text),
        text,
    })
}

/// Extracts every filing, dropping the unextractable ones into the first
/// funnel stage.
pub fn extract_all(filings: &[RawFiling]) -> (Vec<Document>, FunnelStage) {
    let results: Vec<Result<Document, IngestError>> =
        filings.par_iter().map(extract_item7).collect();
    let mut docs = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(d) => docs.push(d),
            Err(e) => warn!("skipping filing: {e}"),
        }
    }
    let stage = FunnelStage {
        stage: "extraction".into(),
        kept: docs.len(),
        dropped: filings.len() - docs.len(),
    };
    (docs, stage)
}

fn partition(
    docs: Vec<Document>,
    stage: &str,
    keep: impl Fn(&Document) -> bool,
) -> (Vec<Document>, FunnelStage) {
    let before = docs.len();
    let kept: Vec<Document> = docs.into_iter().filter(|d| keep(d)).collect();
    let stage = FunnelStage {
        stage: stage.into(),
        kept: kept.len(),
        dropped: before - kept.len(),
    };
    (kept, stage)
}

pub fn filter_min_words(docs: Vec<Document>, min_words: usize) -> (Vec<Document>, FunnelStage) {
    partition(docs, "min_words", |d| d.word_count >= min_words)
}

/// Drops documents whose word count lies more than `threshold` population
/// standard deviations from the mean. Mean and deviation are computed once
/// over the input; a zero deviation drops nothing.
pub fn filter_zscore(docs: Vec<Document>, threshold: f64) -> (Vec<Document>, FunnelStage) {
    let n = docs.len();
    if n < 2 {
        return partition(docs, "zscore", |_| true);
    }
    let mean = docs.iter().map(|d| d.word_count as f64).sum::<f64>() / n as f64;
    let var = docs
        .iter()
        .map(|d| (d.word_count as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        warn!("zscore filter: degenerate distribution (stddev 0), nothing dropped");
        return partition(docs, "zscore", |_| true);
    }
    partition(docs, "zscore", |d| {
        (d.word_count as f64 - mean).abs() <= threshold * sd
    })
}

/// Keeps fiscal years in `first..=last`.
pub fn filter_year(docs: Vec<Document>, first: i32, last: i32) -> (Vec<Document>, FunnelStage) {
    partition(docs, "year", |d| (first..=last).contains(&d.fiscal_year))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub fiscal_year: i32,
    pub path: PathBuf,
}

/// Reads a CSV manifest with header `id,fiscal_year,path`; paths are
/// relative to `base_dir`.
pub fn load_manifest(manifest: &Path, base_dir: &Path) -> Result<Vec<RawFiling>, IngestError> {
    let mpath = manifest.display().to_string();
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| IngestError::Manifest {
        path: mpath.clone(),
        message: e.to_string(),
    })?;
    let mut filings = Vec::new();
    for rec in reader.deserialize::<ManifestRecord>() {
        let rec = rec.map_err(|e| IngestError::Manifest {
            path: mpath.clone(),
            message: e.to_string(),
        })?;
        let path = base_dir.join(&rec.path);
        let body = std::fs::read_to_string(&path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        filings.push(RawFiling::new(rec.id, rec.fiscal_year, body)?);
    }
    Ok(filings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestParams {
    pub min_words: usize,
    pub zscore: f64,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for IngestParams {
    fn default() -> Self {
        Self { min_words: 250, zscore: 2.0, first_year: 2016, last_year: 2022 }
    }
}

/// Extraction followed by the min-words, z-score and year filters, in that
/// order.
pub fn ingest(filings: &[RawFiling], params: &IngestParams) -> (Vec<Document>, FunnelReport) {
    let mut funnel = FunnelReport::new(filings.len());
    let (docs, stage) = extract_all(filings);
    funnel.push(stage);
    let (docs, stage) = filter_min_words(docs, params.min_words);
    funnel.push(stage);
    let (docs, stage) = filter_zscore(docs, params.zscore);
    funnel.push(stage);
    let (docs, stage) = filter_year(docs, params.first_year, params.last_year);
    funnel.push(stage);
    (docs, funnel)
}
