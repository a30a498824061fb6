//! Adaptive model selection over (embedding provider × classifier)
//! candidates.
//!
//! Each candidate is trained once on the training split and scored on the
//! validation split under every metric of the suite. The candidate with the
//! largest (weighted) metric sum wins; ties go to the earlier candidate.
//! Only the winner is ever evaluated on the test split.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate, examples_from_reports, train, ClassifierSpec, ModelParams, TrainConfig};
use crate::corpus::{in_split, LabelScheme, Report, Split};
use crate::embed::{Embedder, EmbeddingProviderSpec};
use crate::metrics::MetricsReport;
use crate::tokenizer::TokenizerConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub embedding: EmbeddingProviderSpec,
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub train_config: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    Sensitivity,
    Specificity,
    WeightedPrecision,
    WeightedRecall,
    WeightedF1,
}

impl MetricName {
    pub fn value(self, report: &MetricsReport) -> f64 {
        match self {
            MetricName::Accuracy => report.accuracy,
            MetricName::Sensitivity => report.sensitivity,
            MetricName::Specificity => report.specificity,
            MetricName::WeightedPrecision => report.weighted_precision,
            MetricName::WeightedRecall => report.weighted_recall,
            MetricName::WeightedF1 => report.weighted_f1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::Sensitivity => "sensitivity",
            MetricName::Specificity => "specificity",
            MetricName::WeightedPrecision => "weighted_precision",
            MetricName::WeightedRecall => "weighted_recall",
            MetricName::WeightedF1 => "weighted_f1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSuite {
    pub metrics: Vec<MetricName>,
    /// One weight per metric; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MetricSuite {
    pub fn new(metrics: Vec<MetricName>) -> Result<Self> {
        let suite = MetricSuite { metrics, weights: None };
        suite.validate()?;
        Ok(suite)
    }

    /// Accuracy, weighted F1, sensitivity and specificity.
    pub fn standard() -> Self {
        MetricSuite {
            metrics: vec![
                MetricName::Accuracy,
                MetricName::WeightedF1,
                MetricName::Sensitivity,
                MetricName::Specificity,
            ],
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::Config("metric suite is empty".into()));
        }
        let mut seen = self.metrics.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.metrics.len() {
            return Err(Error::Config("metric suite lists a metric twice".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.metrics.len() || w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("metric weights must be finite, one per metric".into()));
            }
        }
        Ok(())
    }

    /// Per-metric values and their weighted sum.
    pub fn score(&self, report: &MetricsReport) -> (BTreeMap<String, f64>, f64) {
        let mut values = BTreeMap::new();
        let mut sum = 0.0;
        for (i, m) in self.metrics.iter().enumerate() {
            let v = m.value(report);
            let w = self.weights.as_ref().map_or(1.0, |w| w[i]);
            sum += w * v;
            values.insert(m.as_str().to_string(), v);
        }
        (values, sum)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub id: String,
    pub values: BTreeMap<String, f64>,
    /// `None` when the candidate failed; ranks below every number.
    pub sum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

impl CandidateScore {
    pub fn ranking_score(&self) -> f64 {
        self.sum.unwrap_or(f64::NEG_INFINITY)
    }
}

/// One evaluation performed during a run, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub candidate: String,
    pub split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub winner: String,
    pub per_candidate_validation_scores: Vec<CandidateScore>,
    pub winner_test_metrics: MetricsReport,
    pub evaluations: Vec<Evaluation>,
    #[serde(skip)]
    pub winner_model: Option<ModelParams>,
}

impl SelectionResult {
    /// Candidates ranked best first, list order among equals.
    pub fn leaderboard(&self) -> String {
        let mut ranked: Vec<(usize, &CandidateScore)> = self.per_candidate_validation_scores.iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.ranking_score().total_cmp(&a.1.ranking_score()).then(a.0.cmp(&b.0)));
        let width = ranked.iter().map(|(_, c)| c.id.len()).max().unwrap_or(0).max(9);
        let mut out = format!("{:<4} {:<width$} {:>8}\n", "rank", "candidate", "val_sum");
        for (rank, (_, c)) in ranked.iter().enumerate() {
            let sum = c.sum.map_or_else(|| "failed".to_string(), |s| format!("{s:.4}"));
            let mark = if c.id == self.winner { " *" } else { "" };
            out.push_str(&format!("{:<4} {:<width$} {:>8}{mark}\n", rank + 1, c.id, sum));
        }
        out
    }
}

struct Trained {
    score: CandidateScore,
    model: Option<ModelParams>,
}

fn train_candidate(
    candidate: &Candidate,
    train_reports: &[Report],
    val_reports: &[Report],
    tokenizer: &TokenizerConfig,
    suite: &MetricSuite,
) -> Result<(CandidateScore, ModelParams)> {
    let embedder = Embedder::new(candidate.embedding.clone())?;
    let train_set = examples_from_reports(train_reports, tokenizer, &embedder)?;
    let val_set = examples_from_reports(val_reports, tokenizer, &embedder)?;
    let outcome = train(&candidate.classifier, &train_set, &val_set, &candidate.train_config)?;
    let (_, report) = evaluate(&outcome.params, &val_set)?;
    let (values, sum) = suite.score(&report);
    Ok((
        CandidateScore {
            id: candidate.id.clone(),
            values,
            sum: Some(sum),
            error: None,
            best_epoch: Some(outcome.best_epoch),
        },
        outcome.params,
    ))
}

/// Trains every candidate, picks the validation argmax and evaluates it on
/// the test split. Candidates train on separate threads; results do not
/// depend on scheduling.
pub fn run_selection(
    candidates: &[Candidate],
    corpus: &[Report],
    suite: &MetricSuite,
    tokenizer: &TokenizerConfig,
    scheme: &LabelScheme,
) -> Result<SelectionResult> {
    suite.validate()?;
    if candidates.is_empty() {
        return Err(Error::Selection("no candidates".into()));
    }
    let mut ids: Vec<&str> = candidates.iter().map(|c| c.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Selection(format!("duplicate candidate id `{}`", w[0])));
    }
    let train_reports = in_split(corpus, Split::Train);
    let val_reports = in_split(corpus, Split::Validation);
    let test_reports = in_split(corpus, Split::Test);
    if train_reports.is_empty() || val_reports.is_empty() || test_reports.is_empty() {
        return Err(Error::Selection("train, validation and test splits must all be populated".into()));
    }
    crate::corpus::validate_reports(corpus, scheme)?;

    let trained: Vec<Trained> = std::thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .iter()
            .map(|c| scope.spawn(|| train_candidate(c, &train_reports, &val_reports, tokenizer, suite)))
            .collect();
        handles
            .into_iter()
            .zip(candidates)
            .map(|(h, c)| match h.join().expect("candidate thread panicked") {
                Ok((score, model)) => Trained {
                    score,
                    model: Some(model),
                },
                Err(e) => Trained {
                    score: CandidateScore {
                        id: c.id.clone(),
                        values: BTreeMap::new(),
                        sum: None,
                        error: Some(e.to_string()),
                        best_epoch: None,
                    },
                    model: None,
                },
            })
            .collect()
    });

    let mut evaluations: Vec<Evaluation> = trained
        .iter()
        .filter(|t| t.model.is_some())
        .map(|t| Evaluation {
            candidate: t.score.id.clone(),
            split: Split::Validation,
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, t) in trained.iter().enumerate() {
        if t.model.is_none() {
            continue;
        }
        if best.is_none_or(|b| t.score.ranking_score() > trained[b].score.ranking_score()) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        let reasons: Vec<String> = trained
            .iter()
            .map(|t| format!("{}: {}", t.score.id, t.score.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Selection(format!("every candidate failed ({})", reasons.join("; "))));
    };

    let winner = &candidates[best];
    let model = trained[best].model.clone().expect("winner trained");
    let embedder = Embedder::new(winner.embedding.clone())?;
    let test_set = examples_from_reports(&test_reports, tokenizer, &embedder)?;
    let (_, winner_test_metrics) = evaluate(&model, &test_set)?;
    evaluations.push(Evaluation {
        candidate: winner.id.clone(),
        split: Split::Test,
    });

    Ok(SelectionResult {
        winner: winner.id.clone(),
        per_candidate_validation_scores: trained.into_iter().map(|t| t.score).collect(),
        winner_test_metrics,
        evaluations,
        winner_model: Some(model),
    })
}

/// Selection config file: the candidates and the metric suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub suite: MetricSuite,
    #[serde(rename = "candidate")]
    pub candidates: Vec<Candidate>,
}

impl SelectionConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}
