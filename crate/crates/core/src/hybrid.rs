//! Combination of the DL prediction with the rule verdict.
//!
//! When the DL model says negative but the rules say positive, the rules win,
//! unless the model is very sure of the negative class (probability strictly
//! above the cutoff) and the rule score is below the score cutoff. Every
//! other case keeps the DL prediction.

use serde::{Deserialize, Serialize};

use crate::classifier::Prediction;
use crate::rules::RuleVerdict;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridConfig {
    pub negative_confidence_cutoff: f64,
    pub rule_score_cutoff: i32,
    pub negative_class: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            negative_confidence_cutoff: 0.95,
            rule_score_cutoff: 2,
            negative_class: 0,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.negative_confidence_cutoff > 0.0 && self.negative_confidence_cutoff < 1.0) {
            return Err(Error::Config(format!(
                "negative_confidence_cutoff must lie in (0, 1), got {}",
                self.negative_confidence_cutoff
            )));
        }
        if self.negative_class > 1 {
            return Err(Error::Config("negative_class must be 0 or 1".into()));
        }
        Ok(())
    }

    pub fn positive_class(&self) -> usize {
        1 - self.negative_class
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Dl,
    RuleOverride,
    DlConfidentException,
}

impl std::fmt::Display for DecisionSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecisionSource::Dl => "dl",
            DecisionSource::RuleOverride => "rule_override",
            DecisionSource::DlConfidentException => "dl_confident_exception",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridDecision {
    pub final_class: usize,
    pub source: DecisionSource,
    pub dl_prediction: Prediction,
    pub rule_verdict: RuleVerdict,
}

pub fn combine(dl: &Prediction, rule: &RuleVerdict, config: &HybridConfig) -> Result<HybridDecision> {
    config.validate()?;
    if dl.probabilities.len() != 2 {
        return Err(Error::UnsupportedScheme(format!(
            "hybrid combination needs a binary prediction, got {} classes",
            dl.probabilities.len()
        )));
    }
    let negative = config.negative_class;
    let (final_class, source) = if dl.predicted_class == negative && rule.positive {
        let confident = dl.probabilities[negative] > config.negative_confidence_cutoff;
        if confident && rule.report_score < config.rule_score_cutoff {
            (negative, DecisionSource::DlConfidentException)
        } else {
            (config.positive_class(), DecisionSource::RuleOverride)
        }
    } else {
        (dl.predicted_class, DecisionSource::Dl)
    };
    Ok(HybridDecision {
        final_class,
        source,
        dl_prediction: dl.clone(),
        rule_verdict: rule.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dl(p_neg: f64) -> Prediction {
        Prediction::from_probabilities(vec![p_neg, 1.0 - p_neg])
    }

    fn verdict(score: i32) -> RuleVerdict {
        RuleVerdict {
            report_score: score,
            sentence_scores: vec![score],
            positive: score > 0,
            matched_spans: vec![Vec::new()],
        }
    }

    fn decide(p_neg: f64, score: i32) -> (usize, DecisionSource) {
        let d = combine(&dl(p_neg), &verdict(score), &HybridConfig::default()).unwrap();
        (d.final_class, d.source)
    }

    #[test]
    fn worked_examples() {
        assert_eq!(decide(0.90, 1), (1, DecisionSource::RuleOverride));
        assert_eq!(decide(0.97, 1), (0, DecisionSource::DlConfidentException));
        assert_eq!(decide(0.97, 2), (1, DecisionSource::RuleOverride));
        assert_eq!(decide(0.40, 0), (1, DecisionSource::Dl));
    }

    #[test]
    fn cutoffs_are_strict() {
        assert_eq!(decide(0.95, 1), (1, DecisionSource::RuleOverride));
        assert_eq!(decide(0.951, 1), (0, DecisionSource::DlConfidentException));
    }

    #[test]
    fn negative_rules_keep_the_dl_output() {
        for p in [0.1, 0.5, 0.9, 0.99] {
            for s in [-1, 0] {
                let (class, source) = decide(p, s);
                assert_eq!(class, dl(p).predicted_class);
                assert_eq!(source, DecisionSource::Dl);
            }
        }
    }

    #[test]
    fn multi_class_is_unsupported() {
        let p = Prediction::from_probabilities(vec![0.2, 0.3, 0.5]);
        assert!(matches!(
            combine(&p, &verdict(1), &HybridConfig::default()),
            Err(Error::UnsupportedScheme(_))
        ));
    }
}
