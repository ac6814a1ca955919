//! Name-to-factory tables for the swappable pipeline strategies.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cluster::{Clusterer, DensityParams, Hdbscan};
use crate::config::PipelineConfig;
use crate::keywords::KeywordList;
use crate::reduce::{ExternalReducer, PcaReducer, Reducer};
use crate::topics::{CtfidfModel, NmfModel, TopicModel};

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("unknown {kind} strategy {name:?}, known: {known:?}")]
    Unknown { kind: &'static str, name: String, known: Vec<&'static str> },
    #[error("cannot build {name}: {reason}")]
    Build { name: &'static str, reason: String },
}

/// Everything a factory may draw on besides the config.
pub struct BuildContext<'a> {
    pub config: &'a PipelineConfig,
    pub keywords: &'a KeywordList,
    pub stopwords: &'a BTreeSet<String>,
}

pub type Factory<T> = fn(&BuildContext) -> Result<Box<T>, RegistryError>;

/// Strategies of one kind, looked up by name.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(&'static str, Factory<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: Vec::new() }
    }

    /// Adds or replaces a strategy.
    pub fn register(&mut self, name: &'static str, factory: Factory<T>) -> &mut Self {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, factory));
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn build(&self, name: &str, ctx: &BuildContext) -> Result<Box<T>, RegistryError> {
        let (_, factory) = self.entries.iter().find(|(n, _)| *n == name).ok_or_else(|| RegistryError::Unknown {
            kind: self.kind,
            name: name.to_string(),
            known: self.names(),
        })?;
        factory(ctx)
    }
}

fn pca(ctx: &BuildContext) -> Result<Box<dyn Reducer>, RegistryError> {
    Ok(Box::new(PcaReducer { n_components: ctx.config.thresholds.n_components }))
}

fn external(ctx: &BuildContext) -> Result<Box<dyn Reducer>, RegistryError> {
    let path = ctx.config.paths.reduced_vectors.clone().ok_or(RegistryError::Build {
        name: "external",
        reason: "paths.reduced_vectors is not set".into(),
    })?;
    Ok(Box::new(ExternalReducer { path, n_components: ctx.config.thresholds.n_components }))
}

fn hdbscan(ctx: &BuildContext) -> Result<Box<dyn Clusterer>, RegistryError> {
    let t = &ctx.config.thresholds;
    let params = DensityParams::new(t.min_cluster_size, t.min_samples)
        .map_err(|e| RegistryError::Build { name: "hdbscan", reason: e.to_string() })?;
    Ok(Box::new(Hdbscan { params }))
}

fn ctfidf(ctx: &BuildContext) -> Result<Box<dyn TopicModel>, RegistryError> {
    let t = &ctx.config.thresholds;
    Ok(Box::new(CtfidfModel {
        stopwords: ctx.stopwords.clone(),
        seeds: ctx.keywords.keyword_set(),
        seed_multiplier: t.seed_multiplier,
        reduce_frequent: t.reduce_frequent,
        min_df: t.vectorizer_min_df,
        top_k: t.top_k,
    }))
}

fn nmf(ctx: &BuildContext) -> Result<Box<dyn TopicModel>, RegistryError> {
    let t = &ctx.config.thresholds;
    Ok(Box::new(NmfModel { k: t.nmf_k, params: ctx.config.nmf_params(), min_df: t.vectorizer_min_df, top_k: t.top_k }))
}

pub fn reducers() -> Registry<dyn Reducer> {
    let mut r = Registry::new("reducer");
    r.register("pca", pca).register("external", external);
    r
}

pub fn clusterers() -> Registry<dyn Clusterer> {
    let mut r = Registry::new("clusterer");
    r.register("hdbscan", hdbscan);
    r
}

pub fn topic_models() -> Registry<dyn TopicModel> {
    let mut r = Registry::new("topic model");
    r.register("ctfidf", ctfidf).register("nmf", nmf);
    r
}
