use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fintopic::config::PipelineConfig;
use fintopic::objective::{circle_loss, circle_loss_grad, CircleLossParams, SimilarityBatch, CURRICULUM_END};
use fintopic::pipeline::{run_pipeline, RunManifest, Stage};
use fintopic::vectors::read_vectors;
use serde_json::json;

#[derive(Parser)]
#[command(name = "fintopic", version, about = "Keyword-guided topic modeling of annual-report MD&A sections")]
struct Cli {
    /// Log verbosity; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run several stages in pipeline order (all by default).
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated stage names.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
    },
    /// Read the manifest, extract MD&A sections, apply the year filter.
    Ingest(RunArgs),
    /// Document filters, sentence segmentation and token normalization.
    Prep(RunArgs),
    /// Keyword labels for the refined sentences.
    Label(RunArgs),
    /// Seeded train/test split of the labeled sentences.
    Split(RunArgs),
    /// Dimensionality reduction of the sentence embeddings.
    Reduce(RunArgs),
    /// Density clustering of the reduced embeddings.
    Cluster(RunArgs),
    /// Topic words per cluster.
    Topics(RunArgs),
    /// Coherence, precision and similarity metrics.
    Metrics(RunArgs),
    /// Metrics table, wordcloud weights and funnel.
    Report(RunArgs),
    /// FTSVEC01 utilities.
    Vectors {
        #[command(subcommand)]
        command: VectorsCommand,
    },
    /// Circle loss and its gradient for one batch of similarity scores.
    Loss {
        /// JSON object `{"positives": [..], "negatives": [..]}`.
        #[arg(long)]
        batch: String,
        #[arg(long, default_value_t = CURRICULUM_END.scale)]
        scale: f64,
        #[arg(long, default_value_t = CURRICULUM_END.margin)]
        margin: f64,
    },
}

#[derive(Subcommand)]
enum VectorsCommand {
    /// Print dimension, row count and first key.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the run artifacts.
    #[arg(long, default_value = "run")]
    run_dir: PathBuf,
    /// Override any config field, e.g. `--set thresholds.min_samples=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reducer: Option<String>,
    #[arg(long)]
    clusterer: Option<String>,
    #[arg(long)]
    topic_model: Option<String>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    n_components: Option<usize>,
}

fn toml_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut sets = self.sets.clone();
        let named = [
            ("rng_seed", self.seed.map(|v| v.to_string())),
            ("strategies.reducer", self.reducer.as_deref().map(toml_string)),
            ("strategies.clusterer", self.clusterer.as_deref().map(toml_string)),
            ("strategies.topic_model", self.topic_model.as_deref().map(toml_string)),
            ("thresholds.min_cluster_size", self.min_cluster_size.map(|v| v.to_string())),
            ("thresholds.min_samples", self.min_samples.map(|v| v.to_string())),
            ("thresholds.n_components", self.n_components.map(|v| v.to_string())),
        ];
        sets.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| format!("{k}={v}"))));
        let mut cfg = PipelineConfig::load_with_overrides(&self.config, &sets)
            .with_context(|| format!("loading {}", self.config.display()))?;
        // a command-line path is relative to the working directory
        if let Some(v) = &self.vectors {
            cfg.paths.vectors = Some(v.clone());
        }
        Ok(cfg)
    }

    fn run(&self, stages: &[Stage]) -> Result<RunManifest> {
        let cfg = self.config()?;
        let manifest = run_pipeline(&cfg, &self.run_dir, stages)?;
        for t in &manifest.timings {
            println!("{}\t{:.3}s", t.stage, t.seconds);
        }
        println!("run directory: {}", self.run_dir.display());
        Ok(manifest)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Run { run, stages } => {
            let stages = if stages.is_empty() { Stage::ALL.to_vec() } else { stages };
            run.run(&stages)?;
        }
        Command::Ingest(a) => drop(a.run(&[Stage::Ingest])?),
        Command::Prep(a) => drop(a.run(&[Stage::Prep])?),
        Command::Label(a) => drop(a.run(&[Stage::Label])?),
        Command::Split(a) => drop(a.run(&[Stage::Split])?),
        Command::Reduce(a) => drop(a.run(&[Stage::Reduce])?),
        Command::Cluster(a) => drop(a.run(&[Stage::Cluster])?),
        Command::Topics(a) => drop(a.run(&[Stage::Topics])?),
        Command::Metrics(a) => drop(a.run(&[Stage::Metrics])?),
        Command::Report(a) => drop(a.run(&[Stage::Report])?),
        Command::Vectors { command: VectorsCommand::Inspect { path } } => {
            let m = read_vectors(&path).with_context(|| format!("reading {}", path.display()))?;
            println!("dim\t{}", m.dim());
            println!("rows\t{}", m.rows());
            println!("first_key\t{}", m.keys().first().map_or("", String::as_str));
        }
        Command::Loss { batch, scale, margin } => {
            let batch: SimilarityBatch = serde_json::from_str(&batch).context("parsing --batch")?;
            let batch = SimilarityBatch::new(batch.positives, batch.negatives)?;
            let params = CircleLossParams::new(scale, margin)?;
            let out = json!({
                "loss": circle_loss(&batch, &params)?,
                "grad": circle_loss_grad(&batch, &params)?,
            });
            println!("{out}");
        }
    }
    Ok(())
}
