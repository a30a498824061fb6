use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use serde_json::json;

use vte_pipeline::apms::{run_selection, SelectionConfig};
use vte_pipeline::augment::{augment_corpus, AugmentConfig, AugmentMode, SynonymLexicon};
use vte_pipeline::classifier::{
    evaluate, examples_from_reports, predict_all, train, ClassifierKind, ClassifierSpec, ModelParams, TrainConfig,
};
use vte_pipeline::corpus::{
    generate_synthetic, in_split, load_corpus, split_corpus, write_corpus, LabelScheme, Report, Split, SplitSpec,
    SynthSpec,
};
use vte_pipeline::embed::{write_embeddings, Embedder, EmbeddingProviderSpec};
use vte_pipeline::hybrid::{combine, HybridConfig};
use vte_pipeline::metrics::{compute_metrics, render_table, table_csv};
use vte_pipeline::pipeline::{dry_run, run_pipeline, RunConfig, OUTPUT_ROOT_ENV};
use vte_pipeline::rules::{load_ruleset, RuleSet};
use vte_pipeline::tokenizer::{tokenize, TokenizerConfig, TruncateSide};
use vte_pipeline::{Error, Result};

#[derive(Parser)]
#[command(name = "vte", version, about = "VTE report classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or split a report corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Add synthetic minority-class reports built from the training split.
    Augment(AugmentArgs),
    /// Tokenize reports into fixed-length sequences (JSONL).
    Tokenize(TokenizeArgs),
    /// Write per-report embedding matrices to a binary file.
    Embed(EmbedArgs),
    /// Train a classifier on the train/validation splits.
    Train(TrainArgs),
    /// Evaluate a trained model on one split.
    Evaluate(EvaluateArgs),
    /// Score reports with keyword rules.
    #[command(subcommand)]
    Rules(RulesCmd),
    /// Combine model output with rule verdicts.
    #[command(subcommand)]
    Hybrid(HybridCmd),
    /// Automated model selection over candidate configurations.
    #[command(subcommand)]
    Apms(ApmsCmd),
    /// Run the configured end-to-end pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Generate a seeded synthetic corpus.
    Gen {
        #[arg(long, default_value = "pe")]
        preset: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign train/validation/test splits.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "pe")]
        preset: String,
        #[arg(long, default_value_t = 0.2)]
        test_frac: f64,
        /// Fraction of the non-test reports held out for validation.
        #[arg(long, default_value_t = 0.1)]
        val_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        stratified: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Synonym,
    Swap,
}

#[derive(clap::Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "pe")]
    preset: String,
    #[arg(long, value_enum, default_value = "synonym")]
    mode: ModeArg,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Edit probability; 0.8 for synonyms and 0.2 for swaps when omitted.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 30)]
    aug_min: usize,
    #[arg(long)]
    aug_max: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tab-separated synonym file; the bundled lexicon when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Writes the input corpus followed by the new reports.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(clap::Args)]
struct TokenizerArgs {
    /// Tokenizer preset (pe or dvt), overridden by the explicit flags.
    #[arg(long, default_value = "pe")]
    preset: String,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, value_enum)]
    truncate: Option<SideArg>,
}

impl TokenizerArgs {
    fn config(&self) -> Result<TokenizerConfig> {
        let mut c = TokenizerConfig::preset(&self.preset)?;
        if let Some(m) = self.max_len {
            c.max_len = m;
        }
        if let Some(side) = self.truncate {
            c.truncate_side = match side {
                SideArg::Left => TruncateSide::Left,
                SideArg::Right => TruncateSide::Right,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(clap::Args)]
struct TokenizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Hashed,
    Precomputed,
}

fn provider_spec(
    provider: ProviderArg,
    dim: usize,
    seed: u64,
    path: Option<&PathBuf>,
) -> Result<EmbeddingProviderSpec> {
    match (provider, path) {
        (ProviderArg::Hashed, _) => Ok(EmbeddingProviderSpec::hashed(dim, seed)),
        (ProviderArg::Precomputed, Some(p)) => Ok(EmbeddingProviderSpec::precomputed(dim, p)),
        (ProviderArg::Precomputed, None) => Err(Error::Config(
            "--provider precomputed needs --embeddings".into(),
        )),
    }
}

#[derive(clap::Args)]
struct EmbeddingArgs {
    #[arg(long, value_enum, default_value = "hashed")]
    provider: ProviderArg,
    #[arg(long, default_value_t = 768)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    embedding_seed: u64,
    /// Embedding file read by the precomputed provider.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

impl EmbeddingArgs {
    fn spec(&self) -> Result<EmbeddingProviderSpec> {
        provider_spec(self.provider, self.dim, self.embedding_seed, self.embeddings.as_ref())
    }
}

#[derive(clap::Args)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[arg(long, value_enum, default_value = "hashed")]
    provider: ProviderArg,
    #[arg(long, default_value_t = 768)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Bilstm,
    Lstm,
    Linear,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Corpus with split assignments.
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[command(flatten)]
    embedding: EmbeddingArgs,
    #[arg(long, value_enum, default_value = "bilstm")]
    model: ModelArg,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Also write the metrics table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RulesCmd {
    /// Score every report and write one verdict per line.
    Score {
        /// Rule file, or `demo` for the bundled PE rules.
        #[arg(long, default_value = "demo")]
        ruleset: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum HybridCmd {
    /// Combine model predictions with rule verdicts.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "demo")]
        ruleset: String,
        #[arg(long)]
        corpus: PathBuf,
        /// Restrict to one split.
        #[arg(long)]
        split: Option<Split>,
        #[arg(long, default_value_t = 0.95)]
        negative_cutoff: f64,
        #[arg(long, default_value_t = 2)]
        score_cutoff: i32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ApmsCmd {
    /// Train every candidate and select by summed validation metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Corpus with split assignments.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "pe")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Run all stages from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = OUTPUT_ROOT_ENV, hide_env_values = true)]
        output_root: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Validate the configuration and print the stage plan only.
        #[arg(long)]
        dry_run: bool,
    },
}

fn load_rules(spec: &str) -> Result<RuleSet> {
    if spec == "demo" {
        Ok(RuleSet::demo_pe())
    } else {
        load_ruleset(spec)
    }
}

fn write_jsonl(path: &Path, records: impl IntoIterator<Item = serde_json::Value>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{r}").map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn scheme_of(meta: &serde_json::Value) -> Result<LabelScheme> {
    serde_json::from_value(meta["scheme"].clone()).map_err(|e| Error::Format(format!("model metadata: {e}")))
}

fn embedder_of(meta: &serde_json::Value) -> Result<(TokenizerConfig, Embedder)> {
    let tokenizer = serde_json::from_value(meta["tokenizer"].clone())
        .map_err(|e| Error::Format(format!("model metadata: {e}")))?;
    let spec: EmbeddingProviderSpec = serde_json::from_value(meta["embedding"].clone())
        .map_err(|e| Error::Format(format!("model metadata: {e}")))?;
    Ok((tokenizer, Embedder::new(spec)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corpus(CorpusCmd::Gen { preset, n, seed, out }) => {
            let scheme = LabelScheme::preset(&preset)?;
            let mut spec = if preset == "dvt" {
                SynthSpec::dvt_default(seed)
            } else {
                SynthSpec::pe_default(seed)
            };
            if let Some(n) = n {
                spec.n_reports = n;
            }
            let reports = generate_synthetic(&spec, &scheme)?;
            write_corpus(&out, &reports)?;
            println!("wrote {} reports to {}", reports.len(), out.display());
        }
        Command::Corpus(CorpusCmd::Split {
            corpus,
            preset,
            test_frac,
            val_frac,
            seed,
            stratified,
            out,
        }) => {
            let reports = load_corpus(&corpus, &LabelScheme::preset(&preset)?)?;
            let spec = SplitSpec {
                test_fraction: test_frac,
                validation_fraction_of_train: val_frac,
                seed,
                stratified,
            };
            let split = split_corpus(&reports, &spec)?;
            write_corpus(&out, &split)?;
            for s in [Split::Train, Split::Validation, Split::Test] {
                println!("{s}: {}", in_split(&split, s).len());
            }
        }
        Command::Augment(a) => {
            let scheme = LabelScheme::preset(&a.preset)?;
            let reports = load_corpus(&a.corpus, &scheme)?;
            let mut config = match a.mode {
                ModeArg::Synonym => AugmentConfig::synonym(a.seed),
                ModeArg::Swap => AugmentConfig::swap(a.seed),
            };
            config.n = a.n;
            config.aug_min = a.aug_min;
            config.aug_max = a.aug_max;
            if let Some(p) = a.p {
                match config.mode {
                    AugmentMode::SynonymReplacement => config.p_replace = p,
                    AugmentMode::RandomSwapping => config.p_swap = p,
                }
            }
            let lexicon = match &a.lexicon {
                Some(path) => SynonymLexicon::load_tsv(path)?,
                None => SynonymLexicon::demo(),
            };
            // Only training reports are augmented when splits are present.
            let source: Vec<Report> = if reports.iter().any(|r| r.split.is_some()) {
                in_split(&reports, Split::Train)
            } else {
                reports.clone()
            };
            let new = augment_corpus(&source, &scheme, &config, &lexicon)?;
            let mut all = reports;
            all.extend(new.iter().cloned());
            write_corpus(&a.out, &all)?;
            println!("added {} reports", new.len());
        }
        Command::Tokenize(t) => {
            let config = t.tokenizer.config()?;
            let reports = load_corpus(&t.corpus, &LabelScheme::preset(&t.tokenizer.preset)?)?;
            write_jsonl(
                &t.out,
                reports.iter().map(|r| {
                    let seq = tokenize(&r.text, &config);
                    json!({
                        "id": r.id,
                        "tokens": seq.tokens,
                        "original_length": seq.original_length,
                        "pad_length": seq.pad_length,
                    })
                }),
            )?;
        }
        Command::Embed(e) => {
            let config = e.tokenizer.config()?;
            let reports = load_corpus(&e.corpus, &LabelScheme::preset(&e.tokenizer.preset)?)?;
            let embedder = Embedder::new(provider_spec(e.provider, e.dim, e.seed, e.embeddings.as_ref())?)?;
            let matrices = reports
                .iter()
                .map(|r| embedder.embed(&r.id, &tokenize(&r.text, &config)))
                .collect::<Result<Vec<_>>>()?;
            write_embeddings(&e.out, reports.iter().map(|r| r.id.as_str()).zip(&matrices))?;
            println!("embedded {} reports", matrices.len());
        }
        Command::Train(t) => {
            let scheme = LabelScheme::preset(&t.tokenizer.preset)?;
            let tokenizer = t.tokenizer.config()?;
            let reports = load_corpus(&t.corpus, &scheme)?;
            let embedding = t.embedding.spec()?;
            let embedder = Embedder::new(embedding.clone())?;
            let train_set = examples_from_reports(&in_split(&reports, Split::Train), &tokenizer, &embedder)?;
            let val_set = examples_from_reports(&in_split(&reports, Split::Validation), &tokenizer, &embedder)?;
            let kind = match t.model {
                ModelArg::Bilstm => ClassifierKind::BiLstm,
                ModelArg::Lstm => ClassifierKind::Lstm,
                ModelArg::Linear => ClassifierKind::Linear,
            };
            let spec = ClassifierSpec {
                kind,
                input_dim: embedding.dim,
                hidden_size: t.hidden,
                num_layers: t.layers,
                num_classes: scheme.num_classes(),
            };
            let config = TrainConfig {
                learning_rate: t.lr,
                epochs: t.epochs,
                batch_size: t.batch,
                seed: t.seed,
                ..TrainConfig::default()
            };
            let outcome = train(&spec, &train_set, &val_set, &config)?;
            for h in &outcome.history {
                println!(
                    "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  val_acc {:.3}  val_f1 {:.3}",
                    h.epoch, h.train_loss, h.val_loss, h.val_accuracy, h.val_weighted_f1
                );
            }
            let meta = json!({
                "scheme": scheme,
                "tokenizer": tokenizer,
                "embedding": embedding,
                "best_epoch": outcome.best_epoch,
            });
            outcome.params.save(&t.out, &meta)?;
            println!("best epoch {}; model written to {}", outcome.best_epoch, t.out.display());
        }
        Command::Evaluate(e) => {
            let (params, meta) = ModelParams::load(&e.model)?;
            let scheme = scheme_of(&meta)?;
            let (tokenizer, embedder) = embedder_of(&meta)?;
            let reports = in_split(&load_corpus(&e.corpus, &scheme)?, e.split);
            let examples = examples_from_reports(&reports, &tokenizer, &embedder)?;
            let (loss, _) = evaluate(&params, &examples)?;
            let preds = predict_all(&params, &examples)?;
            let truths: Vec<usize> = examples.iter().map(|x| x.label).collect();
            let classes: Vec<usize> = preds.iter().map(|p| p.predicted_class).collect();
            let probs: Vec<Vec<f64>> = preds.into_iter().map(|p| p.probabilities).collect();
            let report = compute_metrics(&truths, &classes, &scheme)?.with_roc(&truths, &probs)?;
            let rows = vec![("DL".to_string(), report.clone())];
            print!("{}", render_table(&rows));
            println!("loss {loss:.4}");
            for (class, auc) in &report.per_class_auc {
                println!("AUC class {class}: {auc:.3}");
            }
            if let Some(out) = e.out {
                fs::write(&out, table_csv(&rows)?).map_err(|err| Error::Format(format!("{}: {err}", out.display())))?;
            }
        }
        Command::Rules(RulesCmd::Score { ruleset, corpus, out }) => {
            let rules = load_rules(&ruleset)?;
            let reports = load_corpus(&corpus, &LabelScheme::pe())?;
            write_jsonl(
                &out,
                reports.iter().map(|r| {
                    let v = rules.score_report(&r.text);
                    json!({ "id": r.id, "verdict": v })
                }),
            )?;
        }
        Command::Hybrid(HybridCmd::Predict {
            model,
            ruleset,
            corpus,
            split,
            negative_cutoff,
            score_cutoff,
            out,
        }) => {
            let (params, meta) = ModelParams::load(&model)?;
            let scheme = scheme_of(&meta)?;
            let (tokenizer, embedder) = embedder_of(&meta)?;
            let rules = load_rules(&ruleset)?;
            let config = HybridConfig {
                negative_confidence_cutoff: negative_cutoff,
                rule_score_cutoff: score_cutoff,
                negative_class: 0,
            };
            let mut reports = load_corpus(&corpus, &scheme)?;
            if let Some(s) = split {
                reports = in_split(&reports, s);
            }
            let mut records = Vec::with_capacity(reports.len());
            for r in &reports {
                let p = params.forward(&embedder.embed(&r.id, &tokenize(&r.text, &tokenizer))?)?;
                let v = rules.score_report(&r.text);
                let d = combine(&p, &v, &config)?;
                records.push(json!({
                    "id": r.id,
                    "dl_probs": p.probabilities,
                    "rule_score": v.report_score,
                    "final": d.final_class,
                    "source": d.source,
                }));
            }
            write_jsonl(&out, records)?;
        }
        Command::Apms(ApmsCmd::Run {
            config,
            corpus,
            preset,
            out,
        }) => {
            let text = fs::read_to_string(&config).map_err(|e| Error::Format(format!("{}: {e}", config.display())))?;
            let selection = SelectionConfig::from_toml(&text)?;
            let scheme = LabelScheme::preset(&preset)?;
            let reports = load_corpus(&corpus, &scheme)?;
            let result = run_selection(
                &selection.candidates,
                &reports,
                &selection.suite,
                &TokenizerConfig::preset(&preset)?,
                &scheme,
            )?;
            print!("{}", result.leaderboard());
            let json = serde_json::to_string_pretty(&result).map_err(|e| Error::Format(e.to_string()))?;
            fs::write(&out, json).map_err(|e| Error::Format(format!("{}: {e}", out.display())))?;
        }
        Command::Pipeline(PipelineCmd::Run {
            config,
            seed,
            output_root,
            output_dir,
            epochs,
            dry_run: dry,
        }) => {
            let mut c = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                c.seed = seed;
            }
            if let Some(epochs) = epochs {
                c.train.epochs = epochs;
            }
            if output_dir.is_some() {
                c.output_dir = output_dir;
            } else if c.output_dir.is_none() {
                c.output_dir = output_root.map(|root| root.join(&c.name));
            }
            if dry {
                let stages = dry_run(&c)?;
                println!("config ok; output {}", c.output_dir().display());
                for (i, s) in stages.iter().enumerate() {
                    println!("{:>2}. {s}", i + 1);
                }
                return Ok(());
            }
            let outcome = run_pipeline(&c)?;
            let mut rows = vec![("DL".to_string(), outcome.dl_test.clone())];
            if let (Some(r), Some(h)) = (&outcome.rules_test, &outcome.hybrid_test) {
                rows.push(("Rules".into(), r.clone()));
                rows.push(("DL + Rules".into(), h.clone()));
            }
            print!("{}", render_table(&rows));
            println!("outputs in {}", outcome.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
