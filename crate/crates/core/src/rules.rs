//! Expert keyword rules with sentence-level negation.
//!
//! A rule fires on a sentence when every one of its required terms matches
//! somewhere in it. A firing rule adds its score (−1, 0 or +1) to the
//! sentence score, except that a +1 rule contributes 0 when any of its
//! negation terms also matches the sentence. Each rule counts at most once
//! per sentence. The report score is the sum of the sentence scores and the
//! report is positive when that sum exceeds the threshold.
//!
//! Terms are case-insensitive regular expressions, so a plain word such as
//! `segmental` behaves as a substring match (it also matches `subsegmental`).
//!
//! # File format
//!
//! One record per line, fields separated by `;`:
//!
//! ```text
//! ruleset: ct-pe-demo; threshold: 0
//! required: filling & segmental; score: 1; negations: \bno\b | \bwithout\b
//! ```
//!
//! `&` separates required terms and `|` separates negation terms, both only
//! outside parentheses, so `thromb & (pulmonary|lobar)` is two terms.
//! Blank lines and lines starting with `#` are ignored.

use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::tokenizer::split_sentences;
use crate::{Error, Result};

const DEMO_PE: &str = include_str!("../data/pe_rules.txt");

#[derive(Debug, Clone)]
pub struct Rule {
    pub required_terms: Vec<String>,
    pub score: i32,
    pub negation_terms: Vec<String>,
    required: Vec<Regex>,
    negations: Vec<Regex>,
}

fn compile(term: &str) -> std::result::Result<Regex, String> {
    RegexBuilder::new(term)
        .case_insensitive(true)
        .build()
        .map_err(|e| format!("bad pattern `{term}`: {e}"))
}

impl Rule {
    pub fn new<S: AsRef<str>>(required_terms: &[S], score: i32, negation_terms: &[S]) -> std::result::Result<Self, String> {
        let required_terms: Vec<String> = required_terms.iter().map(|s| s.as_ref().trim().to_string()).collect();
        let negation_terms: Vec<String> = negation_terms.iter().map(|s| s.as_ref().trim().to_string()).collect();
        if required_terms.is_empty() || required_terms.iter().any(String::is_empty) {
            return Err("required terms must be non-empty".into());
        }
        if !(-1..=1).contains(&score) {
            return Err(format!("score {score} is not one of -1, 0, 1"));
        }
        if negation_terms.iter().any(String::is_empty) {
            return Err("empty negation term".into());
        }
        Ok(Rule {
            required: required_terms.iter().map(|t| compile(t)).collect::<std::result::Result<_, _>>()?,
            negations: negation_terms.iter().map(|t| compile(t)).collect::<std::result::Result<_, _>>()?,
            required_terms,
            score,
            negation_terms,
        })
    }

    /// Text of the first required term's match when every term matches.
    pub fn fires(&self, sentence: &str) -> Option<String> {
        let mut first = None;
        for re in &self.required {
            let m = re.find(sentence)?;
            first.get_or_insert_with(|| m.as_str().to_string());
        }
        first
    }

    pub fn negated(&self, sentence: &str) -> bool {
        self.negations.iter().any(|re| re.is_match(sentence))
    }
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub name: String,
    pub rules: Vec<Rule>,
    pub threshold: i32,
}

/// One rule whose required terms all matched a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatch {
    /// Zero-based position in the rule set.
    pub rule: usize,
    pub text: String,
    /// Contribution to the sentence score (0 when negated).
    pub score: i32,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub report_score: i32,
    pub sentence_scores: Vec<i32>,
    pub positive: bool,
    pub matched_spans: Vec<Vec<RuleMatch>>,
}

/// Splits on `sep` outside parentheses and brackets.
fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start, mut escaped) = (0i32, 0, false);
    for (i, ch) in s.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match ch {
            '\\' => escaped = true,
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth <= 0 => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

impl RuleSet {
    pub fn new(name: impl Into<String>, rules: Vec<Rule>, threshold: i32) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Validation("a rule set needs at least one rule".into()));
        }
        Ok(RuleSet {
            name: name.into(),
            rules,
            threshold,
        })
    }

    /// Parses the text format described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("rules");
        let mut threshold = 0;
        let mut rules = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let index = rules.len() + 1;
            let mut required = None;
            let mut score = None;
            let mut negations = Vec::new();
            let mut header = false;
            for field in split_top_level(line, ';') {
                let field = field.trim();
                if field.is_empty() {
                    continue;
                }
                let (key, value) = field.split_once(':').ok_or_else(|| Error::RuleLoad {
                    rule: index,
                    message: format!("field `{field}` is not `key: value`"),
                })?;
                let value = value.trim();
                match key.trim() {
                    "ruleset" => {
                        header = true;
                        name = value.to_string();
                    }
                    "threshold" => {
                        header = true;
                        threshold = value.parse().map_err(|_| {
                            Error::Validation(format!("threshold `{value}` is not an integer"))
                        })?;
                    }
                    "required" => required = Some(split_top_level(value, '&')),
                    "score" => {
                        let s: i32 = value.parse().map_err(|_| Error::RuleLoad {
                            rule: index,
                            message: format!("score `{value}` is not an integer"),
                        })?;
                        score = Some(s);
                    }
                    "negations" => negations = split_top_level(value, '|'),
                    other => {
                        return Err(Error::RuleLoad {
                            rule: index,
                            message: format!("unknown field `{other}`"),
                        })
                    }
                }
            }
            if header && required.is_none() && score.is_none() {
                continue;
            }
            let (Some(required), Some(score)) = (required, score) else {
                return Err(Error::RuleLoad {
                    rule: index,
                    message: "a rule needs `required` and `score`".into(),
                });
            };
            if !(-1..=1).contains(&score) {
                return Err(Error::Validation(format!(
                    "rule {index}: score {score} is not one of -1, 0, 1"
                )));
            }
            let rule = Rule::new(&required, score, &negations).map_err(|message| Error::RuleLoad { rule: index, message })?;
            rules.push(rule);
        }
        Self::new(name, rules, threshold)
    }

    /// The bundled demonstration PE rule set.
    pub fn demo_pe() -> Self {
        Self::parse(DEMO_PE).expect("bundled rule set parses")
    }

    /// Contribution of every firing rule and the resulting sentence score.
    pub fn score_sentence(&self, sentence: &str) -> (i32, Vec<RuleMatch>) {
        let mut matches = Vec::new();
        let mut total = 0;
        for (i, rule) in self.rules.iter().enumerate() {
            let Some(text) = rule.fires(sentence) else {
                continue;
            };
            let negated = rule.score > 0 && rule.negated(sentence);
            let score = if negated { 0 } else { rule.score };
            total += score;
            matches.push(RuleMatch {
                rule: i,
                text,
                score,
                negated,
            });
        }
        (total, matches)
    }

    pub fn score_report(&self, text: &str) -> RuleVerdict {
        let (sentence_scores, matched_spans): (Vec<i32>, Vec<Vec<RuleMatch>>) =
            split_sentences(text).iter().map(|s| self.score_sentence(s)).unzip();
        let report_score = sentence_scores.iter().sum();
        RuleVerdict {
            report_score,
            positive: report_score > self.threshold,
            sentence_scores,
            matched_spans,
        }
    }
}

pub fn load_ruleset(path: impl AsRef<Path>) -> Result<RuleSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RuleSet::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NEGATIONS: &str = "no | negative | without | question | unchanged";

    fn filling_segmental() -> RuleSet {
        RuleSet::parse(&format!("required: segmental & filling; score: 1; negations: {NEGATIONS}")).unwrap()
    }

    #[test]
    fn positive_example_sentence_scores_one() {
        let (score, spans) =
            filling_segmental().score_sentence("There is a small filling defect within the subsegmental branch.");
        assert_eq!(score, 1);
        assert_eq!(spans[0].text, "segmental");
    }

    #[test]
    fn negated_example_sentence_scores_zero() {
        let (score, spans) = filling_segmental().score_sentence("No filling defect in the segmental arteries.");
        assert_eq!(score, 0);
        assert!(spans[0].negated);
    }

    #[test]
    fn empty_text_scores_zero() {
        let v = filling_segmental().score_report("");
        assert_eq!(v.report_score, 0);
        assert!(!v.positive);
    }

    #[test]
    fn report_sums_sentences_and_uses_strict_threshold() {
        let rules = filling_segmental();
        let v = rules.score_report("Filling defect in a segmental artery. The heart is normal.");
        assert_eq!(v.sentence_scores, vec![1, 0]);
        assert_eq!(v.report_score, 1);
        assert!(v.positive);
        let v = rules.score_report("No filling defect in the segmental arteries. Unchanged segmental filling.");
        assert_eq!(v.report_score, 0);
        assert!(!v.positive);
    }

    #[test]
    fn negation_never_touches_negative_rules() {
        let rules = RuleSet::parse("required: chronic; score: -1; negations: no").unwrap();
        assert_eq!(rules.score_sentence("no chronic change").0, -1);
    }

    #[test]
    fn a_rule_counts_once_per_sentence() {
        let rules = RuleSet::parse("required: embol; score: 1").unwrap();
        assert_eq!(rules.score_sentence("emboli and embolus and embolism").0, 1);
    }

    #[test]
    fn duplicate_rules_each_count() {
        let rules = RuleSet::parse("required: clot; score: 1\nrequired: clot; score: 1").unwrap();
        assert_eq!(rules.score_sentence("a clot").0, 2);
    }

    #[test]
    fn demo_ruleset_loads() {
        let rules = RuleSet::demo_pe();
        assert!(rules.rules.len() >= 3);
        assert_eq!(rules.threshold, 0);
        assert!(rules.score_report("A saddle embolus is seen.").positive);
        assert!(!rules.score_report("There is no evidence of pulmonary embolism.").positive);
    }

    #[test]
    fn out_of_range_score_is_a_validation_error() {
        let err = RuleSet::parse("required: clot; score: 2").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_pattern_names_the_rule() {
        let err = RuleSet::parse("# comment\n\nrequired: (; score: 1").unwrap_err();
        assert!(matches!(err, Error::RuleLoad { rule: 1, .. }), "{err}");
        let err = RuleSet::parse("required: clot; score: 1\nrequired: a & [; score: 0").unwrap_err();
        assert!(matches!(err, Error::RuleLoad { rule: 2, .. }), "{err}");
    }

    #[test]
    fn empty_ruleset_is_rejected() {
        assert!(RuleSet::parse("ruleset: empty; threshold: 0").is_err());
    }

    #[test]
    fn top_level_split_respects_groups() {
        assert_eq!(split_top_level("a & (b|c) & d", '&'), vec!["a ", " (b|c) ", " d"]);
        assert_eq!(split_top_level(r"\bno\b|x\|y", '|'), vec![r"\bno\b", r"x\|y"]);
    }
}
