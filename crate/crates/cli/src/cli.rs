//! Argument definitions. Flags override the matching keys of `--config`.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use hcrf_opinion::features::FeatureBlock;

use crate::commands::{self, InspectOptions};
use crate::config::{ModelKind, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hcrf-opinion", version, about = "HCRF opinion classification of pause-segmented spoken reviews")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a corpus into inter-pausal units; writes the corpus and an IPU table.
    Segment(RunArgs),
    /// Train one model on all labeled documents and write a model archive.
    Train(RunArgs),
    /// Predict every document of a corpus with an archived model.
    Predict(PredictArgs),
    /// Stratified k-fold cross-validation of one or more models.
    Evaluate(RunArgs),
    /// Report per-state features, alignment and activation words of an HCRF archive.
    Inspect(InspectArgs),
    /// Write a synthetic opinion-dynamics corpus with its resources.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pause threshold in ms (150, 300 and 500 are the standard settings).
    #[arg(long)]
    pub threshold_ms: Option<u64>,
    /// Comma-separated blocks (bong, embedding, lexicon, pattern, paralinguistic) or `all`.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub hidden_states: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub context_window: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub l2: Option<Vec<f64>>,
    /// Inverse regularization strengths for the logistic regression.
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub model: Option<Vec<ModelKind>>,
    /// Word embedding file (`word v1 v2 ...` per line).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Lexicon file; repeat for several.
    #[arg(long)]
    pub lexicon: Vec<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.corpus {
            cfg.corpus = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.threshold_ms {
            cfg.features.threshold_ms = v;
        }
        if let Some(v) = &self.features {
            cfg.features.blocks = FeatureBlock::parse_list(v)?;
        }
        if let Some(v) = &self.hidden_states {
            cfg.hcrf.hidden_states = v.clone();
        }
        if let Some(v) = &self.context_window {
            cfg.hcrf.context_windows = v.clone();
        }
        if let Some(v) = &self.l2 {
            cfg.hcrf.l2 = v.clone();
        }
        if let Some(v) = &self.c {
            cfg.logreg.c = v.clone();
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.model {
            cfg.models = v.clone();
        }
        if let Some(v) = &self.embeddings {
            cfg.resources.embeddings = Some(v.clone());
        }
        if !self.lexicon.is_empty() {
            cfg.resources.lexicons = self.lexicon.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Features and activation words listed per state.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Alignment margin; defaults to the spread of the label-state weights.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Comma-separated words whose per-state profile is reported.
    #[arg(long, value_delimiter = ',')]
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub num_docs: Option<usize>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment(a) => {
            let s = commands::segment(&a.resolve()?)?;
            println!("{} documents, {} IPUs at {} ms", s.documents, s.ipus, s.threshold_ms);
        }
        Command::Train(a) => {
            let t = commands::train(&a.resolve()?)?;
            println!("{} -> {}", t.archive.choice.describe(), t.archive_path.display());
        }
        Command::Predict(a) => {
            let p = commands::predict(&a.archive, &a.corpus, &a.out)?;
            println!("{} predictions -> {}", p.len(), a.out.display());
        }
        Command::Evaluate(a) => {
            let r = commands::evaluate(&a.resolve()?)?;
            for m in &r.models {
                println!(
                    "{}: accuracy {:.2}, weighted F1 {:.2}",
                    m.model.name(),
                    m.pooled.accuracy,
                    m.pooled.weighted_f1
                );
            }
        }
        Command::Inspect(a) => {
            let opts = InspectOptions {
                top_k: a.top_k,
                tau: a.tau,
                words: a.words,
            };
            let r = commands::inspect(&a.archive, &a.out, &opts)?;
            print!("{}", r.to_text());
        }
        Command::Generate(a) => {
            let mut cfg = a.run.resolve()?;
            if let Some(n) = a.num_docs {
                cfg.synthetic.num_docs = n;
            }
            let syn = commands::generate(&cfg)?;
            println!(
                "{} documents; order-insensitive Bayes accuracy {:.4}",
                syn.transcripts.len(),
                syn.bayes_accuracy
            );
        }
    }
    Ok(())
}
