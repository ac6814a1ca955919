//! Stage orchestration over a run directory. Every stage reads its inputs
//! from earlier stages' subdirectories, so a subset of stages can be rerun
//! as long as the missing stages' outputs are already present.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{read_assignments, write_assignments, ClusterError};
use crate::config::{ConfigError, PipelineConfig};
use crate::ingest::{ingest, load_manifest, Document, FunnelReport, IngestError, IngestParams};
use crate::jsonl::{read_json, read_jsonl, write_json, write_jsonl};
use crate::keywords::{KeywordError, KeywordList};
use crate::labeling::{build_labeled_dataset, relaxed_ids, split_topicwise, LabelError, LabeledSentence};
use crate::metrics::{evaluate, MetricError, MetricsReport};
use crate::reduce::ReduceError;
use crate::registry::{self, BuildContext, RegistryError};
use crate::report::emit_report;
use crate::textprep::{
    filter_sentence_length, prepare_documents, refine_sentences_by_keyword, segment_sentences, Normalizer, Sentence,
    TextError, TokenDoc,
};
use crate::topics::{TopicError, TopicRepresentation};
use crate::vectors::{read_vectors, write_vectors, EmbeddingMatrix, VectorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Prep,
    Label,
    Split,
    Reduce,
    Cluster,
    Topics,
    Metrics,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Prep,
        Stage::Label,
        Stage::Split,
        Stage::Reduce,
        Stage::Cluster,
        Stage::Topics,
        Stage::Metrics,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Prep => "prep",
            Stage::Label => "label",
            Stage::Split => "split",
            Stage::Reduce => "reduce",
            Stage::Cluster => "cluster",
            Stage::Topics => "topics",
            Stage::Metrics => "metrics",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage} needs {missing}, which is missing; run the producing stage first")]
    StageDependencyMissing { stage: Stage, missing: String },
    #[error(transparent)]
    ConfigInvalid(#[from] ConfigError),
    #[error("vector keys do not match the refined sentences at row {row}: expected {expected:?}, found {found:?}")]
    VectorKeys { row: usize, expected: Option<String>, found: Option<String> },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Keywords(#[from] KeywordError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Vectors(#[from] VectorError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Topics(#[from] TopicError),
    #[error(transparent)]
    Metrics(#[from] MetricError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// File names inside a run directory, relative to its root.
pub mod artifacts {
    pub const CONFIG: &str = "config.toml";
    pub const MANIFEST: &str = "manifest.json";
    pub const DOCUMENTS: &str = "ingest/documents.jsonl";
    pub const INGEST_FUNNEL: &str = "ingest/funnel.json";
    pub const SENTENCES: &str = "prep/sentences.jsonl";
    pub const REFINED: &str = "prep/refined.jsonl";
    pub const TOKENS: &str = "prep/tokens.jsonl";
    pub const EMBED_INPUT: &str = "prep/embed_input.jsonl";
    pub const FUNNEL: &str = "prep/funnel.json";
    pub const LABELED: &str = "label/labeled.jsonl";
    pub const LABEL_COUNTS: &str = "label/counts.json";
    pub const TRAIN: &str = "split/train.jsonl";
    pub const TEST: &str = "split/test.jsonl";
    pub const SPLIT_COUNTS: &str = "split/counts.json";
    pub const REDUCED: &str = "reduce/reduced.ftsvec";
    pub const ASSIGNMENTS: &str = "cluster/assignments.jsonl";
    pub const CLUSTER_SUMMARY: &str = "cluster/summary.json";
    pub const TOPICS: &str = "topics/topics.json";
    pub const TOPIC_LABELS: &str = "topics/labels.jsonl";
    pub const METRICS: &str = "metrics/metrics.json";
    pub const REPORT_DIR: &str = "report";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

/// Audit record of one run. Everything except `timings` is stable across
/// reruns with identical inputs and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the config snapshot.
    pub config_hash: String,
    pub stages: Vec<Stage>,
    pub timings: Vec<StageTiming>,
    /// SHA-256 of every file referenced by the config.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file in the run directory except this manifest.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

fn digest_file(path: &Path) -> Result<String, PipelineError> {
    Ok(sha256_hex(&std::fs::read(path).map_err(io_err(path))?))
}

/// Digests of all files under `root`, keyed by `/`-separated relative path.
pub fn digest_tree(root: &Path, skip: &[&str]) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(root).expect("walked from root");
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if !skip.contains(&rel.as_str()) {
                out.insert(rel, digest_file(&path)?);
            }
        }
    }
    Ok(out)
}

/// Key/text record handed to the external embedding step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedInput {
    pub key: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyLabel {
    pub key: String,
    pub label: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub n_clusters: usize,
    pub outliers: usize,
    pub sizes: Vec<usize>,
}

/// Shared resources of one run.
struct Run<'a> {
    cfg: &'a PipelineConfig,
    root: &'a Path,
    keywords: KeywordList,
    normalizer: Normalizer,
}

impl Run<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn require(&self, stage: Stage, rel: &str) -> Result<PathBuf, PipelineError> {
        let p = self.path(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(PipelineError::StageDependencyMissing { stage, missing: rel.to_string() })
        }
    }

    fn vectors_path(&self, stage: Stage) -> Result<PathBuf, PipelineError> {
        self.cfg
            .paths
            .vectors
            .clone()
            .ok_or(PipelineError::StageDependencyMissing { stage, missing: "paths.vectors".into() })
    }

    fn output(&self, rel: &str) -> Result<PathBuf, PipelineError> {
        let p = self.path(rel);
        let dir = p.parent().expect("artifact paths have a stage directory");
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(p)
    }

    fn read_jsonl<T: serde::de::DeserializeOwned>(&self, stage: Stage, rel: &str) -> Result<Vec<T>, PipelineError> {
        let p = self.require(stage, rel)?;
        read_jsonl(&p).map_err(io_err(&p))
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, stage: Stage, rel: &str) -> Result<T, PipelineError> {
        let p = self.require(stage, rel)?;
        read_json(&p).map_err(io_err(&p))
    }

    fn write_jsonl<T: Serialize>(&self, rel: &str, items: impl IntoIterator<Item = T>) -> Result<(), PipelineError> {
        let p = self.output(rel)?;
        write_jsonl(&p, items).map_err(io_err(&p))
    }

    fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let p = self.output(rel)?;
        write_json(&p, value).map_err(io_err(&p))
    }

    fn build_context<R>(&self, f: impl FnOnce(&BuildContext) -> R) -> R {
        let stopwords = self.normalizer.stopword_set();
        f(&BuildContext { config: self.cfg, keywords: &self.keywords, stopwords: &stopwords })
    }

    fn execute(&self, stage: Stage) -> Result<(), PipelineError> {
        use artifacts::*;
        let t = &self.cfg.thresholds;
        match stage {
            Stage::Ingest => {
                let filings = load_manifest(&self.cfg.paths.manifest, &self.cfg.filings_dir())?;
                let params = IngestParams {
                    min_words: t.min_words,
                    zscore: t.zscore,
                    first_year: t.years[0],
                    last_year: t.years[1],
                };
                let (docs, funnel) = ingest(&filings, &params);
                self.write_jsonl(DOCUMENTS, &docs)?;
                self.write_json(INGEST_FUNNEL, &funnel)?;
            }
            Stage::Prep => {
                let docs: Vec<Document> = self.read_jsonl(stage, DOCUMENTS)?;
                let mut funnel: FunnelReport = self.read_json(stage, INGEST_FUNNEL)?;
                let (kept, cosine) = prepare_documents(&docs, &self.normalizer, &self.cfg.doc_filter_params())?;
                funnel.push(cosine);
                let kept: HashSet<&str> = kept.iter().map(|d| d.key.as_str()).collect();
                let sentences: Vec<Sentence> = docs
                    .iter()
                    .filter(|d| kept.contains(d.id.as_str()))
                    .flat_map(segment_sentences)
                    .collect();
                let sentences = filter_sentence_length(sentences, t.sentence_len[0], t.sentence_len[1]);
                let refined = refine_sentences_by_keyword(sentences.clone(), &self.keywords);
                let tokens: Vec<TokenDoc> = refined
                    .iter()
                    .map(|s| TokenDoc { key: s.key(), tokens: self.normalizer.normalize(&s.cleaned) })
                    .collect();
                self.write_jsonl(SENTENCES, &sentences)?;
                self.write_jsonl(REFINED, &refined)?;
                self.write_jsonl(TOKENS, &tokens)?;
                self.write_jsonl(EMBED_INPUT, refined.iter().map(|s| EmbedInput { key: s.key(), text: s.cleaned.clone() }))?;
                self.write_json(FUNNEL, &funnel)?;
            }
            Stage::Label => {
                let sentences: Vec<Sentence> = self.read_jsonl(stage, SENTENCES)?;
                let relaxed = relaxed_ids(&self.keywords, &self.cfg.labeling.relaxed_topics)?;
                let labeled = build_labeled_dataset(&sentences, &self.keywords, &relaxed);
                let mut counts: BTreeMap<&str, usize> = self.keywords.topics().iter().map(|d| (d.name.as_str(), 0)).collect();
                for s in &labeled {
                    *counts.get_mut(s.label.as_str()).expect("label is a keyword domain") += 1;
                }
                self.write_jsonl(LABELED, &labeled)?;
                self.write_json(LABEL_COUNTS, &counts)?;
            }
            Stage::Split => {
                let labeled: Vec<LabeledSentence> = self.read_jsonl(stage, LABELED)?;
                let split = split_topicwise(&labeled, t.train_fraction, self.cfg.rng_seed)?;
                self.write_jsonl(TRAIN, &split.train)?;
                self.write_jsonl(TEST, &split.test)?;
                self.write_json(SPLIT_COUNTS, &split.per_topic_counts)?;
            }
            Stage::Reduce => {
                let tokens: Vec<TokenDoc> = self.read_jsonl(stage, TOKENS)?;
                let vectors = self.load_vectors(stage, &tokens)?;
                let reducer = self.build_context(|ctx| registry::reducers().build(&self.cfg.strategies.reducer, ctx))?;
                info!("reducing {} x {} with {}", vectors.rows(), vectors.dim(), reducer.name());
                write_vectors(&reducer.reduce(&vectors)?, &self.output(REDUCED)?)?;
            }
            Stage::Cluster => {
                let reduced = read_vectors(&self.require(stage, REDUCED)?)?;
                let clusterer =
                    self.build_context(|ctx| registry::clusterers().build(&self.cfg.strategies.clusterer, ctx))?;
                let a = clusterer.cluster(&reduced)?;
                info!("{} clusters, {} outliers", a.n_clusters, a.count_outliers());
                write_assignments(&self.output(ASSIGNMENTS)?, reduced.keys(), &a.labels)?;
                let summary = ClusterSummary { n_clusters: a.n_clusters, outliers: a.count_outliers(), sizes: a.sizes() };
                self.write_json(CLUSTER_SUMMARY, &summary)?;
            }
            Stage::Topics => {
                let tokens: Vec<TokenDoc> = self.read_jsonl(stage, TOKENS)?;
                let (keys, labels) = read_assignments(&self.require(stage, ASSIGNMENTS)?)?;
                check_keys(keys.iter().map(String::as_str), tokens.iter().map(|d| d.key.as_str()))?;
                let model =
                    self.build_context(|ctx| registry::topic_models().build(&self.cfg.strategies.topic_model, ctx))?;
                let fit = model.fit(&tokens, &labels)?;
                self.write_json(TOPICS, &fit.topics)?;
                self.write_jsonl(
                    TOPIC_LABELS,
                    keys.into_iter().zip(fit.labels).map(|(key, label)| KeyLabel { key, label }),
                )?;
            }
            Stage::Metrics => {
                let tokens: Vec<TokenDoc> = self.read_jsonl(stage, TOKENS)?;
                let topics: TopicRepresentation = self.read_json(stage, TOPICS)?;
                let labels: Vec<KeyLabel> = self.read_jsonl(stage, TOPIC_LABELS)?;
                let vectors = self.load_vectors(stage, &tokens)?;
                check_keys(labels.iter().map(|l| l.key.as_str()), vectors.keys().iter().map(String::as_str))?;
                let labels: Vec<i64> = labels.into_iter().map(|l| l.label).collect();
                let report = evaluate(&topics, &labels, &tokens, &vectors, &self.keywords, &self.cfg.coherence())?;
                self.write_json(METRICS, &report)?;
            }
            Stage::Report => {
                let metrics: MetricsReport = self.read_json(stage, METRICS)?;
                let topics: TopicRepresentation = self.read_json(stage, TOPICS)?;
                let funnel: FunnelReport = self.read_json(stage, FUNNEL)?;
                let dir = self.path(REPORT_DIR);
                emit_report(&dir, &self.cfg.strategies.topic_model, &metrics, &topics, &funnel, &self.keywords)
                    .map_err(io_err(&dir))?;
            }
        }
        Ok(())
    }

    /// Sentence embeddings; rows must follow the refined sentence order.
    fn load_vectors(&self, stage: Stage, tokens: &[TokenDoc]) -> Result<EmbeddingMatrix, PipelineError> {
        let path = self.vectors_path(stage)?;
        let m = read_vectors(&path)?;
        check_keys(tokens.iter().map(|d| d.key.as_str()), m.keys().iter().map(String::as_str))?;
        Ok(m)
    }
}

fn check_keys<'a>(
    expected: impl IntoIterator<Item = &'a str>,
    found: impl IntoIterator<Item = &'a str>,
) -> Result<(), PipelineError> {
    let mut e = expected.into_iter();
    let mut f = found.into_iter();
    for row in 0.. {
        match (e.next(), f.next()) {
            (None, None) => return Ok(()),
            (a, b) if a == b => {}
            (a, b) => {
                return Err(PipelineError::VectorKeys {
                    row,
                    expected: a.map(str::to_string),
                    found: b.map(str::to_string),
                })
            }
        }
    }
    unreachable!("loop returns")
}

/// Keyword list and normalizer named by the config.
pub fn load_resources(cfg: &PipelineConfig) -> Result<(KeywordList, Normalizer), PipelineError> {
    let keywords = match &cfg.paths.keywords {
        Some(p) => KeywordList::load(p)?,
        None => KeywordList::builtin(),
    };
    let normalizer = Normalizer::from_files(&cfg.paths.stopwords, cfg.paths.lemmas.as_deref(), keywords.keyword_set())?;
    Ok((keywords, normalizer))
}

/// Runs `stages` (in pipeline order) into `run_dir`, writes the config
/// snapshot and the run manifest, and returns the manifest.
pub fn run_pipeline(cfg: &PipelineConfig, run_dir: &Path, stages: &[Stage]) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let stages: Vec<Stage> = stages.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    std::fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    let snapshot = cfg.to_toml_string();
    let snap_path = run_dir.join(artifacts::CONFIG);
    std::fs::write(&snap_path, &snapshot).map_err(io_err(&snap_path))?;
    let (keywords, normalizer) = load_resources(cfg)?;
    let run = Run { cfg, root: run_dir, keywords, normalizer };
    let mut timings = Vec::new();
    for &stage in &stages {
        info!("stage {stage}");
        let start = Instant::now();
        run.execute(stage)?;
        timings.push(StageTiming { stage, seconds: start.elapsed().as_secs_f64() });
    }
    let p = &cfg.paths;
    let mut inputs = BTreeMap::new();
    let files = std::iter::once(&p.manifest)
        .chain(&p.keywords)
        .chain(&p.stopwords)
        .chain(&p.lemmas)
        .chain(&p.vectors)
        .chain(&p.reduced_vectors);
    for f in files {
        inputs.insert(f.display().to_string(), digest_file(f)?);
    }
    let manifest = RunManifest {
        config_hash: sha256_hex(snapshot.as_bytes()),
        stages,
        timings,
        inputs,
        outputs: digest_tree(run_dir, &[artifacts::MANIFEST])?,
    };
    let mpath = run_dir.join(artifacts::MANIFEST);
    write_json(&mpath, &manifest).map_err(io_err(&mpath))?;
    Ok(manifest)
}
