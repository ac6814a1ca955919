//! Pipeline configuration: a TOML file with paths, thresholds, strategy
//! names and labeling options. Relative paths resolve against the config
//! file's directory; environment variables may override paths only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::CoherenceConfig;
use crate::registry;
use crate::textprep::DocFilterParams;
use crate::topics::NmfParams;

/// Prefix of the path override variables, e.g. `FINTOPIC_MANIFEST`.
pub const ENV_PREFIX: &str = "FINTOPIC_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config invalid: {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// CSV manifest `id,fiscal_year,path`.
    pub manifest: PathBuf,
    /// Base of the manifest's filing paths; defaults to the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filings_dir: Option<PathBuf>,
    /// Keyword list; the shipped list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<PathBuf>,
    /// Stopword lists; the shipped list when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stopwords: Vec<PathBuf>,
    /// Lemma table; the shipped table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<PathBuf>,
    /// Sentence embeddings in FTSVEC01, one row per refined sentence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<PathBuf>,
    /// Precomputed reduction for the `external` reducer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_vectors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_words: usize,
    pub zscore: f64,
    pub years: [i32; 2],
    pub sentence_len: [usize; 2],
    pub phrase_min_count: usize,
    pub phrase_threshold: f64,
    pub min_df: f64,
    pub max_df: f64,
    pub tfidf_floor: f64,
    pub cosine_floor: f64,
    pub n_components: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Document-frequency floor of the topic vectorizer.
    pub vectorizer_min_df: usize,
    pub seed_multiplier: f64,
    pub reduce_frequent: bool,
    pub top_k: usize,
    pub window: usize,
    pub train_fraction: f64,
    pub nmf_k: usize,
    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        let doc = DocFilterParams::default();
        let nmf = NmfParams::default();
        Self {
            min_words: 250,
            zscore: 2.0,
            years: [2016, 2022],
            sentence_len: [5, 50],
            phrase_min_count: doc.phrase_min_count,
            phrase_threshold: doc.phrase_threshold,
            min_df: doc.min_df,
            max_df: doc.max_df,
            tfidf_floor: doc.tfidf_floor,
            cosine_floor: doc.cosine_floor,
            n_components: 10,
            min_cluster_size: 1250,
            min_samples: 10,
            vectorizer_min_df: 10,
            seed_multiplier: 50.0,
            reduce_frequent: true,
            top_k: 5,
            window: 20,
            train_fraction: 0.8,
            nmf_k: 14,
            nmf_max_iters: nmf.max_iters,
            nmf_tol: nmf.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Strategies {
    pub reducer: String,
    pub clusterer: String,
    pub topic_model: String,
}

impl Default for Strategies {
    fn default() -> Self {
        Self { reducer: "pca".into(), clusterer: "hdbscan".into(), topic_model: "ctfidf".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Labeling {
    /// Topics labeled under the relaxed rule.
    pub relaxed_topics: Vec<String>,
}

impl Default for Labeling {
    fn default() -> Self {
        Self { relaxed_topics: vec!["Litigation".into(), "Covid-19".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub rng_seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub strategies: Strategies,
    #[serde(default)]
    pub labeling: Labeling,
}

fn check(cond: bool, field: &str, reason: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(invalid(field, reason))
    }
}

fn unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl PipelineConfig {
    /// A config with default thresholds for the given manifest.
    pub fn with_manifest(manifest: impl Into<PathBuf>) -> Self {
        Self {
            rng_seed: 0,
            paths: Paths {
                manifest: manifest.into(),
                filings_dir: None,
                keywords: None,
                stopwords: Vec::new(),
                lemmas: None,
                vectors: None,
                reduced_vectors: None,
            },
            thresholds: Thresholds::default(),
            strategies: Strategies::default(),
            labeling: Labeling::default(),
        }
    }

    /// Reads, resolves, applies process environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base, |k| std::env::var_os(k))
    }

    /// Like [`load`](Self::load), with `section.field=value` overrides applied
    /// to the TOML before parsing. Values are TOML literals; anything that
    /// does not parse as one is taken as a string.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let text = apply_overrides(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base, |k| std::env::var_os(k))
    }

    /// Parses `text`, resolves relative paths against `base`, applies the
    /// overrides returned by `env` and validates.
    pub fn from_toml_str(
        text: &str,
        base: &Path,
        env: impl Fn(&str) -> Option<std::ffi::OsString>,
    ) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.apply_env(env);
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Path overrides: `FINTOPIC_<FIELD>`; `FINTOPIC_STOPWORDS` holds a
    /// platform path list.
    fn apply_env(&mut self, env: impl Fn(&str) -> Option<std::ffi::OsString>) {
        let var = |name: &str| env(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty());
        let p = &mut self.paths;
        if let Some(v) = var("MANIFEST") {
            p.manifest = v.into();
        }
        for (name, slot) in [
            ("FILINGS_DIR", &mut p.filings_dir),
            ("KEYWORDS", &mut p.keywords),
            ("LEMMAS", &mut p.lemmas),
            ("VECTORS", &mut p.vectors),
            ("REDUCED_VECTORS", &mut p.reduced_vectors),
        ] {
            if let Some(v) = var(name) {
                *slot = Some(v.into());
            }
        }
        if let Some(v) = var("STOPWORDS") {
            p.stopwords = std::env::split_paths(&v).collect();
        }
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        join(&mut p.manifest);
        p.stopwords.iter_mut().for_each(join);
        for slot in [&mut p.filings_dir, &mut p.keywords, &mut p.lemmas, &mut p.vectors, &mut p.reduced_vectors] {
            slot.iter_mut().for_each(join);
        }
    }

    /// Filing directory: explicit or the manifest's directory.
    pub fn filings_dir(&self) -> PathBuf {
        self.paths.filings_dir.clone().unwrap_or_else(|| {
            self.paths.manifest.parent().map(Path::to_path_buf).unwrap_or_default()
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.thresholds;
        check(t.min_words >= 1, "thresholds.min_words", "must be at least 1")?;
        check(t.zscore > 0.0 && t.zscore.is_finite(), "thresholds.zscore", "must be positive")?;
        check(t.years[0] <= t.years[1], "thresholds.years", "first year after last year")?;
        check(
            t.sentence_len[0] >= 1 && t.sentence_len[0] <= t.sentence_len[1],
            "thresholds.sentence_len",
            "need 1 <= min <= max",
        )?;
        check(t.phrase_min_count >= 1, "thresholds.phrase_min_count", "must be at least 1")?;
        check(t.phrase_threshold > 0.0, "thresholds.phrase_threshold", "must be positive")?;
        check(
            unit_interval(t.min_df) && unit_interval(t.max_df) && t.min_df < t.max_df,
            "thresholds.min_df",
            "need 0 <= min_df < max_df <= 1",
        )?;
        check(unit_interval(t.tfidf_floor), "thresholds.tfidf_floor", "must lie in [0, 1]")?;
        check((-1.0..=1.0).contains(&t.cosine_floor), "thresholds.cosine_floor", "must lie in [-1, 1]")?;
        check(t.n_components >= 1, "thresholds.n_components", "must be at least 1")?;
        check(t.min_cluster_size >= 2, "thresholds.min_cluster_size", "must be at least 2")?;
        check(t.min_samples >= 1, "thresholds.min_samples", "must be at least 1")?;
        check(t.vectorizer_min_df >= 1, "thresholds.vectorizer_min_df", "must be at least 1")?;
        check(t.seed_multiplier > 0.0, "thresholds.seed_multiplier", "must be positive")?;
        check(t.top_k >= 2, "thresholds.top_k", "must be at least 2")?;
        check(t.window >= 2, "thresholds.window", "must be at least 2")?;
        check(
            t.train_fraction > 0.0 && t.train_fraction < 1.0,
            "thresholds.train_fraction",
            "must lie in (0, 1)",
        )?;
        check(t.nmf_k >= 1, "thresholds.nmf_k", "must be at least 1")?;
        check(t.nmf_tol >= 0.0, "thresholds.nmf_tol", "must be non-negative")?;

        let s = &self.strategies;
        for (field, name, known) in [
            ("strategies.reducer", &s.reducer, registry::reducers().names()),
            ("strategies.clusterer", &s.clusterer, registry::clusterers().names()),
            ("strategies.topic_model", &s.topic_model, registry::topic_models().names()),
        ] {
            check(known.contains(&name.as_str()), field, &format!("unknown strategy {name:?}, known: {known:?}"))?;
        }
        if s.reducer == "external" {
            check(self.paths.reduced_vectors.is_some(), "paths.reduced_vectors", "required by the external reducer")?;
        }

        let p = &self.paths;
        check(p.manifest.is_file(), "paths.manifest", &format!("{} does not exist", p.manifest.display()))?;
        let files = p.keywords.iter().chain(&p.stopwords).chain(&p.lemmas).chain(&p.vectors).chain(&p.reduced_vectors);
        for f in files {
            check(f.is_file(), "paths", &format!("{} does not exist", f.display()))?;
        }
        if let Some(d) = &p.filings_dir {
            check(d.is_dir(), "paths.filings_dir", &format!("{} is not a directory", d.display()))?;
        }
        Ok(())
    }

    /// Canonical TOML text of the resolved config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn doc_filter_params(&self) -> DocFilterParams {
        let t = &self.thresholds;
        DocFilterParams {
            phrase_min_count: t.phrase_min_count,
            phrase_threshold: t.phrase_threshold,
            min_df: t.min_df,
            max_df: t.max_df,
            tfidf_floor: t.tfidf_floor,
            cosine_floor: t.cosine_floor,
        }
    }

    pub fn coherence(&self) -> CoherenceConfig {
        CoherenceConfig { window_size: self.thresholds.window, top_k: self.thresholds.top_k, ..Default::default() }
    }

    pub fn nmf_params(&self) -> NmfParams {
        NmfParams { max_iters: self.thresholds.nmf_max_iters, tol: self.thresholds.nmf_tol, seed: self.rng_seed }
    }
}

/// Sets dotted keys in a TOML document and returns the edited text.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ConfigError> {
    let mut root: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| invalid(o, "override must look like key=value"))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut parts: Vec<&str> = key.trim().split('.').collect();
        let leaf = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| invalid(o, "empty key"))?;
        let mut table = &mut root;
        for part in parts {
            table = table
                .entry(part)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| invalid(key, "not a table"))?;
        }
        table.insert(leaf.to_string(), value);
    }
    Ok(toml::to_string(&root).expect("table serializes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::ffi::OsString;

    fn no_env(_: &str) -> Option<OsString> {
        None
    }

    fn setup() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest.csv"), "id,fiscal_year,path\n").unwrap();
        std::fs::write(dir.path().join("alt.csv"), "id,fiscal_year,path\n").unwrap();
        dir
    }

    #[test]
    fn defaults_and_resolution() {
        let dir = setup();
        let cfg = PipelineConfig::from_toml_str("[paths]\nmanifest = \"manifest.csv\"\n", dir.path(), no_env).unwrap();
        assert_eq!(cfg.paths.manifest, dir.path().join("manifest.csv"));
        assert_eq!(cfg.filings_dir(), dir.path());
        let t = &cfg.thresholds;
        assert_eq!((t.min_words, t.years, t.sentence_len), (250, [2016, 2022], [5, 50]));
        assert_eq!((t.n_components, t.min_cluster_size, t.min_samples, t.top_k, t.window), (10, 1250, 10, 5, 20));
        assert_eq!((t.zscore, t.cosine_floor, t.seed_multiplier, t.train_fraction), (2.0, 0.6, 50.0, 0.8));
        assert_eq!(cfg.strategies, Strategies::default());
    }

    #[test]
    fn env_overrides_paths_only() {
        let dir = setup();
        let env: HashMap<&str, OsString> = [
            ("FINTOPIC_MANIFEST", OsString::from("alt.csv")),
            ("FINTOPIC_MIN_WORDS", OsString::from("3")),
        ]
        .into();
        let cfg =
            PipelineConfig::from_toml_str("[paths]\nmanifest = \"manifest.csv\"\n", dir.path(), |k| env.get(k).cloned())
                .unwrap();
        assert_eq!(cfg.paths.manifest, dir.path().join("alt.csv"));
        assert_eq!(cfg.thresholds.min_words, 250);
    }

    #[test]
    fn invalid_values() {
        let dir = setup();
        let cases = [
            ("[thresholds]\ntrain_fraction = 1.0", "thresholds.train_fraction"),
            ("[thresholds]\nyears = [2022, 2016]", "thresholds.years"),
            ("[thresholds]\nwindow = 1", "thresholds.window"),
            ("[strategies]\nclusterer = \"kmeans\"", "strategies.clusterer"),
            ("[strategies]\nreducer = \"external\"", "paths.reduced_vectors"),
        ];
        for (extra, field) in cases {
            let text = format!("[paths]\nmanifest = \"manifest.csv\"\n{extra}\n");
            match PipelineConfig::from_toml_str(&text, dir.path(), no_env) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{extra}: {other:?}"),
            }
        }
        let missing = PipelineConfig::from_toml_str("[paths]\nmanifest = \"nope.csv\"\n", dir.path(), no_env);
        assert!(matches!(missing, Err(ConfigError::Invalid { field, .. }) if field == "paths.manifest"));
        let unknown = PipelineConfig::from_toml_str("[paths]\nmanifest = \"m.csv\"\nbogus = 1\n", dir.path(), no_env);
        assert!(matches!(unknown, Err(ConfigError::Parse(_))));
    }

    #[test]
    fn snapshot_round_trips() {
        let dir = setup();
        let cfg = PipelineConfig::from_toml_str(
            "rng_seed = 7\n[paths]\nmanifest = \"manifest.csv\"\n[thresholds]\nmin_cluster_size = 20\n",
            dir.path(),
            no_env,
        )
        .unwrap();
        let again = PipelineConfig::from_toml_str(&cfg.to_toml_string(), Path::new("/elsewhere"), no_env).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn dotted_overrides() {
        let dir = setup();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "rng_seed = 1\n[paths]\nmanifest = \"manifest.csv\"\n").unwrap();
        let sets = [
            "rng_seed=9".to_string(),
            "thresholds.min_samples=3".into(),
            "strategies.topic_model=nmf".into(),
            "thresholds.years=[2017, 2018]".into(),
        ];
        let cfg = PipelineConfig::load_with_overrides(&path, &sets).unwrap();
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(cfg.thresholds.min_samples, 3);
        assert_eq!(cfg.strategies.topic_model, "nmf");
        assert_eq!(cfg.thresholds.years, [2017, 2018]);
        assert!(matches!(
            PipelineConfig::load_with_overrides(&path, &["thresholds.bogus=1".into()]),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(apply_overrides("", &["novalue".into()]), Err(ConfigError::Invalid { .. })));
    }
}
