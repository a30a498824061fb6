//! End-to-end runs driven by a TOML run configuration.
//!
//! Stages, in order: `corpus`, `split`, `augment` (training split only),
//! `tokenize`, `embed`, `train`, `evaluate`, and for the PE task `rules` and
//! `hybrid`. Every run writes its artifacts and a `manifest.json` into one
//! output directory, guarded by a lock file.
//!
//! Stage seeds are derived from the global `seed`; seed fields inside the
//! `split`, `augment` and `train` sections are overwritten. The manifest
//! records the effective values.
//!
//! ```toml
//! name = "pe-demo"
//! seed = 7
//! ruleset = "demo"
//!
//! [dataset]
//! preset = "pe"
//!
//! [embedding]
//! kind = "hashed"
//! dim = 64
//!
//! [classifier]
//! kind = "bilstm"
//! hidden_size = 16
//! num_layers = 1
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::augment::{augment_corpus, AugmentConfig, SynonymLexicon};
use crate::classifier::{
    evaluate, examples_from_reports, predict_all, train, ClassifierKind, ClassifierSpec, EpochRecord, TrainConfig,
};
use crate::corpus::{generate_synthetic, in_split, load_corpus, split_corpus, write_corpus, LabelScheme, Report, Split, SplitSpec, SynthSpec};
use crate::embed::{Embedder, EmbeddingProviderSpec};
use crate::hybrid::{combine, HybridConfig};
use crate::metrics::{compute_metrics, roc_csv, table_csv, MetricsReport};
use crate::rules::{load_ruleset, RuleSet};
use crate::tokenizer::TokenizerConfig;
use crate::{sub_seed, Error, Result};

/// Environment variable naming the default parent of run directories.
pub const OUTPUT_ROOT_ENV: &str = "VTE_OUTPUT_ROOT";

pub const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".vte.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// `pe` or `dvt`; selects the label scheme and the presets.
    pub preset: String,
    /// JSONL corpus; a synthetic corpus is generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    pub kind: ClassifierKind,
    #[serde(default = "default_hidden")]
    pub hidden_size: usize,
    #[serde(default = "default_layers")]
    pub num_layers: usize,
}

fn default_hidden() -> usize {
    256
}
fn default_layers() -> usize {
    2
}
fn default_name() -> String {
    "run".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitSpec,
    /// Defaults to the dataset preset's tokenizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<TokenizerConfig>,
    /// No augmentation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentConfig>,
    /// Synonym lexicon file; the bundled demo lexicon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    pub embedding: EmbeddingProviderSpec,
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub train: TrainConfig,
    /// `demo` for the bundled PE rules, or a rule file path. PE only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ruleset: Option<String>,
    #[serde(default)]
    pub hybrid: HybridConfig,
    /// Defaults to `$VTE_OUTPUT_ROOT/<name>`, or `runs/<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scheme(&self) -> Result<LabelScheme> {
        LabelScheme::preset(&self.dataset.preset)
    }

    pub fn is_pe(&self) -> bool {
        self.dataset.preset == "pe"
    }

    pub fn tokenizer_config(&self) -> Result<TokenizerConfig> {
        match &self.tokenizer {
            Some(t) => Ok(t.clone()),
            None => TokenizerConfig::preset(&self.dataset.preset),
        }
    }

    pub fn classifier_spec(&self) -> Result<ClassifierSpec> {
        Ok(ClassifierSpec {
            kind: self.classifier.kind,
            input_dim: self.embedding.dim,
            hidden_size: self.classifier.hidden_size,
            num_layers: self.classifier.num_layers,
            num_classes: self.scheme()?.num_classes(),
        })
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: sub_seed(self.seed, 1),
            ..self.split
        }
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let seed = sub_seed(self.seed, 0);
        let mut spec = match (&self.dataset.synthetic, self.dataset.preset.as_str()) {
            (Some(s), _) => s.clone(),
            (None, "pe") => SynthSpec::pe_default(seed),
            (None, "dvt") => SynthSpec::dvt_default(seed),
            (None, other) => return Err(Error::Config(format!("unknown dataset preset `{other}`"))),
        };
        spec.seed = seed;
        Ok(spec)
    }

    pub fn augment_config(&self) -> Option<AugmentConfig> {
        self.augment.clone().map(|a| AugmentConfig {
            seed: sub_seed(self.seed, 2),
            ..a
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: sub_seed(self.seed, 3),
            ..self.train.clone()
        }
    }

    /// Checks every section; no stage runs on an invalid config.
    pub fn validate(&self) -> Result<()> {
        let scheme = self.scheme()?;
        match (self.is_pe(), &self.ruleset) {
            (false, Some(_)) => {
                return Err(Error::Config(format!(
                    "rules and hybrid combination apply to the PE task only; remove `ruleset` from the `{}` run",
                    self.dataset.preset
                )))
            }
            (true, None) => return Err(Error::Config("the PE task needs a `ruleset`".into())),
            _ => {}
        }
        if self.dataset.path.is_none() {
            self.synth_spec()?.validate(&scheme)?;
        }
        self.split.validate()?;
        self.tokenizer_config()?.validate()?;
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        self.embedding.validate()?;
        self.classifier_spec()?.validate()?;
        self.train.validate()?;
        if self.is_pe() {
            self.hybrid.validate()?;
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("run name `{}` is not a plain file name", self.name)));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(dir) => dir.clone(),
            None => std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"))
                .join(&self.name),
        }
    }

    /// The stages a run of this config executes.
    pub fn stages(&self) -> Vec<&'static str> {
        let mut s = vec!["corpus", "split", "augment", "tokenize", "embed", "train", "evaluate"];
        if self.is_pe() {
            s.extend(["rules", "hybrid"]);
        }
        s
    }

    /// SHA-256 of the configuration, output location excluded.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            output_dir: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    /// Report ids consumed by the stage, by role.
    pub inputs: BTreeMap<String, Vec<String>>,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub started_at: u64,
    pub finished_at: u64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub stages: Vec<StageRecord>,
    /// Output file name to SHA-256.
    pub outputs: BTreeMap<String, String>,
    /// The resolved configuration, derived seeds included.
    pub effective: serde_json::Value,
}

impl Manifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub dl_test: MetricsReport,
    pub rules_test: Option<MetricsReport>,
    pub hybrid_test: Option<MetricsReport>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn ids(reports: &[Report]) -> Vec<String> {
    reports.iter().map(|r| r.id.clone()).collect()
}

fn labels(reports: &[Report]) -> Vec<usize> {
    reports.iter().map(|r| r.label.expect("validated")).collect()
}

/// Exclusive claim on an output directory.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Config(format!("{} is in use by another run (remove {} if stale)", dir.display(), path.display()))
            } else {
                Error::io(&path, e)
            }
        })?;
        Ok(OutputLock(path))
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut StageRecord) -> Result<T>) -> Result<T> {
        let mut record = StageRecord {
            name: name.to_string(),
            status: StageStatus::Completed,
            inputs: BTreeMap::new(),
            detail: serde_json::Value::Null,
        };
        let result = f(&mut record);
        if result.is_err() {
            record.status = StageStatus::Failed;
        }
        self.manifest.stages.push(record);
        result.map_err(|e| Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn write_file(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record_output(file)
    }

    fn record_output(&mut self, file: &str) -> Result<()> {
        let path = self.path(file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.insert(file.to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    fn write_manifest(&mut self) -> Result<()> {
        self.manifest.finished_at = now();
        let path = self.path(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn history_csv(history: &[EpochRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for h in history {
        w.serialize(h).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn load_rules(spec: &str) -> Result<RuleSet> {
    if spec == "demo" {
        Ok(RuleSet::demo_pe())
    } else {
        load_ruleset(spec)
    }
}

/// Validates `config` and returns the stage plan without running anything.
pub fn dry_run(config: &RunConfig) -> Result<Vec<&'static str>> {
    config.validate()?;
    Ok(config.stages())
}

/// Runs every stage. On failure the manifest is still written, marked
/// incomplete, and the error names the failing stage.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let dir = config.output_dir();
    let _lock = OutputLock::acquire(&dir)?;
    let effective = json!({
        "config": config,
        "split": config.split_spec(),
        "synthetic": if config.dataset.path.is_none() { Some(config.synth_spec()?) } else { None },
        "augment": config.augment_config(),
        "train": config.train_config(),
        "tokenizer": config.tokenizer_config()?,
        "classifier": config.classifier_spec()?,
    });
    let mut run = Run {
        dir: dir.clone(),
        manifest: Manifest {
            name: config.name.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_sha256: config.hash(),
            started_at: now(),
            finished_at: 0,
            complete: false,
            error: None,
            stages: Vec::new(),
            outputs: BTreeMap::new(),
            effective,
        },
    };
    // A previous run's files must not pass for this run's outputs.
    for stale in [MANIFEST_FILE, "corpus.jsonl", "augmented.jsonl", "model.bin", "history.csv", "metrics.csv", "roc.csv", "predictions.jsonl"] {
        let _ = fs::remove_file(dir.join(stale));
    }
    match execute(config, &mut run) {
        Ok((dl_test, rules_test, hybrid_test)) => {
            run.manifest.complete = true;
            run.write_manifest()?;
            Ok(PipelineOutcome {
                output_dir: dir,
                manifest: run.manifest,
                dl_test,
                rules_test,
                hybrid_test,
            })
        }
        Err(e) => {
            run.manifest.error = Some(e.to_string());
            run.write_manifest()?;
            Err(e)
        }
    }
}

type StageMetrics = (MetricsReport, Option<MetricsReport>, Option<MetricsReport>);

fn execute(config: &RunConfig, run: &mut Run) -> Result<StageMetrics> {
    let scheme = config.scheme()?;
    let tokenizer = config.tokenizer_config()?;
    let spec = config.classifier_spec()?;

    let corpus = run.stage("corpus", |rec| {
        let reports = match &config.dataset.path {
            Some(path) => load_corpus(path, &scheme)?,
            None => generate_synthetic(&config.synth_spec()?, &scheme)?,
        };
        rec.detail = json!({ "reports": reports.len(), "source": config.dataset.path });
        Ok(reports)
    })?;

    let split = run.stage("split", |rec| {
        let out = split_corpus(&corpus, &config.split_spec())?;
        rec.inputs.insert("corpus".into(), ids(&corpus));
        rec.detail = json!({
            "train": in_split(&out, Split::Train).len(),
            "validation": in_split(&out, Split::Validation).len(),
            "test": in_split(&out, Split::Test).len(),
        });
        Ok(out)
    })?;
    write_corpus(run.path("corpus.jsonl"), &split)?;
    run.record_output("corpus.jsonl")?;
    let train_reports = in_split(&split, Split::Train);
    let val_reports = in_split(&split, Split::Validation);
    let test_reports = in_split(&split, Split::Test);

    let augmented = run.stage("augment", |rec| {
        rec.inputs.insert("source".into(), ids(&train_reports));
        let Some(aug) = config.augment_config() else {
            rec.detail = json!({ "generated": 0 });
            return Ok(Vec::new());
        };
        let lexicon = match &config.lexicon {
            Some(path) => SynonymLexicon::load_tsv(path)?,
            None => SynonymLexicon::demo(),
        };
        let out = augment_corpus(&train_reports, &scheme, &aug, &lexicon)?;
        rec.detail = json!({ "generated": out.len(), "mode": aug.mode, "class": scheme.minority_class });
        Ok(out)
    })?;
    write_corpus(run.path("augmented.jsonl"), &augmented)?;
    run.record_output("augmented.jsonl")?;
    let mut fit_reports = train_reports.clone();
    fit_reports.extend(augmented.iter().cloned());

    run.stage("tokenize", |rec| {
        let mut truncated = 0;
        for r in fit_reports.iter().chain(&val_reports).chain(&test_reports) {
            let seq = crate::tokenizer::tokenize(&r.text, &tokenizer);
            if seq.original_length + 1 > tokenizer.max_len {
                truncated += 1;
            }
        }
        rec.inputs.insert("train".into(), ids(&fit_reports));
        rec.inputs.insert("validation".into(), ids(&val_reports));
        rec.inputs.insert("test".into(), ids(&test_reports));
        rec.detail = json!({ "max_len": tokenizer.max_len, "truncate_side": tokenizer.truncate_side, "truncated": truncated });
        Ok(())
    })?;

    let (train_set, val_set, test_set) = run.stage("embed", |rec| {
        let embedder = Embedder::new(config.embedding.clone())?;
        let train_set = examples_from_reports(&fit_reports, &tokenizer, &embedder)?;
        let val_set = examples_from_reports(&val_reports, &tokenizer, &embedder)?;
        let test_set = examples_from_reports(&test_reports, &tokenizer, &embedder)?;
        rec.detail = json!({ "kind": config.embedding.kind, "dim": config.embedding.dim });
        Ok((train_set, val_set, test_set))
    })?;

    let outcome = run.stage("train", |rec| {
        rec.inputs.insert("train".into(), ids(&fit_reports));
        rec.inputs.insert("validation".into(), ids(&val_reports));
        let outcome = train(&spec, &train_set, &val_set, &config.train_config())?;
        rec.detail = json!({ "best_epoch": outcome.best_epoch, "epochs_run": outcome.history.len() });
        Ok(outcome)
    })?;
    let metadata = json!({
        "config_sha256": config.hash(),
        "scheme": scheme,
        "tokenizer": tokenizer,
        "embedding": config.embedding,
        "best_epoch": outcome.best_epoch,
    });
    outcome.params.save(run.path("model.bin"), &metadata)?;
    run.record_output("model.bin")?;
    let history = history_csv(&outcome.history)?;
    run.write_file("history.csv", history.as_bytes())?;

    let truths = labels(&test_reports);
    let (dl_predictions, dl_test) = run.stage("evaluate", |rec| {
        rec.inputs.insert("test".into(), ids(&test_reports));
        let preds = predict_all(&outcome.params, &test_set)?;
        let classes: Vec<usize> = preds.iter().map(|p| p.predicted_class).collect();
        let probs: Vec<Vec<f64>> = preds.iter().map(|p| p.probabilities.clone()).collect();
        let report = compute_metrics(&truths, &classes, &scheme)?.with_roc(&truths, &probs)?;
        let (val_loss, _) = evaluate(&outcome.params, &val_set)?;
        rec.detail = json!({ "accuracy": report.accuracy, "weighted_f1": report.weighted_f1, "validation_loss": val_loss });
        Ok((preds, report))
    })?;

    let mut records: Vec<serde_json::Value> = test_reports
        .iter()
        .zip(&dl_predictions)
        .map(|(r, p)| {
            json!({
                "id": r.id,
                "truth": r.label,
                "dl_probs": p.probabilities,
                "dl_class": p.predicted_class,
            })
        })
        .collect();
    let mut rows = vec![("DL".to_string(), dl_test.clone())];
    let mut rules_test = None;
    let mut hybrid_test = None;

    if config.is_pe() {
        let ruleset_spec = config.ruleset.as_deref().expect("validated");
        let verdicts = run.stage("rules", |rec| {
            rec.inputs.insert("test".into(), ids(&test_reports));
            let rules = load_rules(ruleset_spec)?;
            let verdicts: Vec<_> = test_reports.iter().map(|r| rules.score_report(&r.text)).collect();
            let classes: Vec<usize> = verdicts
                .iter()
                .map(|v| if v.positive { config.hybrid.positive_class() } else { config.hybrid.negative_class })
                .collect();
            let report = compute_metrics(&truths, &classes, &scheme)?;
            rec.detail = json!({ "ruleset": rules.name, "rules": rules.rules.len(), "accuracy": report.accuracy });
            rules_test = Some(report);
            Ok(verdicts)
        })?;
        run.stage("hybrid", |rec| {
            rec.inputs.insert("test".into(), ids(&test_reports));
            let mut classes = Vec::with_capacity(verdicts.len());
            let mut overrides = 0;
            for ((p, v), record) in dl_predictions.iter().zip(&verdicts).zip(records.iter_mut()) {
                let d = combine(p, v, &config.hybrid)?;
                if d.final_class != p.predicted_class {
                    overrides += 1;
                }
                record["rule_score"] = json!(v.report_score);
                record["final"] = json!(d.final_class);
                record["source"] = json!(d.source);
                classes.push(d.final_class);
            }
            let report = compute_metrics(&truths, &classes, &scheme)?;
            rec.detail = json!({ "overrides": overrides, "accuracy": report.accuracy, "specificity": report.specificity });
            hybrid_test = Some(report);
            Ok(())
        })?;
        rows.push(("Rules".to_string(), rules_test.clone().expect("set by stage")));
        rows.push(("DL + Rules".to_string(), hybrid_test.clone().expect("set by stage")));
    }

    run.write_file("metrics.csv", table_csv(&rows)?.as_bytes())?;
    run.write_file("roc.csv", roc_csv(&rows)?.as_bytes())?;
    let path = run.path("predictions.jsonl");
    {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for r in &records {
            serde_json::to_writer(&mut w, r).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    run.record_output("predictions.jsonl")?;
    Ok((dl_test, rules_test, hybrid_test))
}
