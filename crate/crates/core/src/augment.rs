//! Minority-class text augmentation by synonym replacement or random swapping.
//!
//! Each synthetic report starts from a randomly drawn minority-class report.
//! Edits are applied one sentence at a time until the target edit count from
//! [`target_edit_count`] is reached. The probabilities `p_replace` / `p_swap`
//! gate each attempted edit; an attempt that is declined, or that lands on a
//! sentence with nothing to edit, is retried on a freshly drawn sentence. After
//! `20 * target` attempts the partially edited text is returned as is.
//!
//! Sentences are edited at the whitespace-word level so that punctuation and
//! decimals travel with their words and the rebuilt text keeps its sentence
//! boundaries.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelScheme, Report};
use crate::tokenizer::split_sentences;
use crate::{rng_from_seed, sub_seed, Error, Result};

const DEMO_LEXICON: &str = include_str!("../data/lexicon.tsv");

/// Attempts allowed per target edit before giving up on a sample.
pub const ATTEMPTS_PER_EDIT: usize = 20;

/// Word → synonyms, looked up case-insensitively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    /// Builds a lexicon, dropping self-synonyms. An entry left without any
    /// synonym is an error.
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut lexicon = SynonymLexicon::default();
        for (word, synonyms) in entries {
            lexicon.insert(word.as_ref(), synonyms.iter().map(AsRef::as_ref))?;
        }
        Ok(lexicon)
    }

    fn insert<'a>(&mut self, word: &str, synonyms: impl Iterator<Item = &'a str>) -> Result<()> {
        let key = word.trim().to_lowercase();
        let entry = self.entries.entry(key.clone()).or_default();
        for s in synonyms {
            let s = s.trim().to_lowercase();
            if !s.is_empty() && s != key && !entry.contains(&s) {
                entry.push(s);
            }
        }
        if entry.is_empty() {
            self.entries.remove(&key);
            return Err(Error::Validation(format!(
                "lexicon entry `{key}` has no synonym other than itself"
            )));
        }
        Ok(())
    }

    /// The lexicon shipped with the crate.
    pub fn demo() -> Self {
        Self::from_tsv(DEMO_LEXICON).expect("bundled lexicon parses")
    }

    /// Parses `word<TAB>syn1|syn2|...` lines; `#` starts a comment line.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lexicon = SynonymLexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, synonyms) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: "<lexicon>".into(),
                line: i + 1,
                message: "expected `word<TAB>synonyms`".into(),
            })?;
            lexicon
                .insert(word, synonyms.split('|'))
                .map_err(|e| Error::Parse {
                    path: "<lexicon>".into(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
        }
        Ok(lexicon)
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }

    /// Imports single-word pairs from a PPDB-style file
    /// (`LHS ||| phrase ||| paraphrase ||| ...`). Multi-word phrases are skipped.
    pub fn from_ppdb(text: &str) -> Result<Self> {
        let mut lexicon = SynonymLexicon::default();
        for line in text.lines() {
            let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
            if fields.len() < 3 {
                continue;
            }
            let (phrase, paraphrase) = (fields[1], fields[2]);
            if phrase.contains(char::is_whitespace)
                || paraphrase.contains(char::is_whitespace)
                || phrase.eq_ignore_ascii_case(paraphrase)
            {
                continue;
            }
            lexicon.insert(phrase, std::iter::once(paraphrase))?;
        }
        Ok(lexicon)
    }

    pub fn lookup(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Keeps entries for which `keep(word, synonyms)` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(&str, &[String]) -> bool) {
        self.entries.retain(|k, v| keep(k, v));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    SynonymReplacement,
    RandomSwapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    pub p_replace: f64,
    pub p_swap: f64,
    pub aug_min: usize,
    pub aug_max: Option<usize>,
    /// Number of synthetic reports to produce.
    pub n: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::synonym(0)
    }
}

impl AugmentConfig {
    /// 200 synonym-replacement samples at p = 0.8, at least 30 edits.
    pub fn synonym(seed: u64) -> Self {
        AugmentConfig {
            mode: AugmentMode::SynonymReplacement,
            p_replace: 0.8,
            p_swap: 0.2,
            aug_min: 30,
            aug_max: None,
            n: 200,
            seed,
        }
    }

    /// 200 random-swap samples at p = 0.2, at least 30 edits.
    pub fn swap(seed: u64) -> Self {
        AugmentConfig {
            mode: AugmentMode::RandomSwapping,
            ..Self::synonym(seed)
        }
    }

    /// Probability gating the active mode's edits.
    pub fn probability(&self) -> f64 {
        match self.mode {
            AugmentMode::SynonymReplacement => self.p_replace,
            AugmentMode::RandomSwapping => self.p_swap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_replace", self.p_replace), ("p_swap", self.p_swap)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.aug_min < 1 {
            return Err(Error::Config("aug_min must be at least 1".into()));
        }
        if let Some(max) = self.aug_max {
            if max < self.aug_min {
                return Err(Error::Config(format!(
                    "aug_max ({max}) is below aug_min ({})",
                    self.aug_min
                )));
            }
        }
        Ok(())
    }
}

/// Number of edits to apply to a report of `token_count` words:
/// `ceil(p * token_count)` raised to `aug_min` and capped at `aug_max`.
pub fn target_edit_count(token_count: usize, config: &AugmentConfig) -> usize {
    let from_p = (config.probability() * token_count as f64 - 1e-9).ceil().max(0.0) as usize;
    let lower = from_p.max(config.aug_min);
    match config.aug_max {
        Some(max) => lower.min(max),
        None => lower,
    }
}

/// Result of one attempted sentence edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOutcome {
    Applied,
    /// The probability gate declined the edit.
    Declined,
    /// Nothing editable at the chosen spot (no synonym, or fewer than two tokens).
    Skipped,
}

/// Splits a word into (leading punctuation, core, trailing punctuation).
fn word_core(word: &str) -> (&str, &str, &str) {
    let start = word.find(char::is_alphanumeric).unwrap_or(word.len());
    let end = word
        .rfind(char::is_alphanumeric)
        .map_or(start, |i| i + word[i..].chars().next().map_or(1, char::len_utf8));
    (&word[..start], &word[start..end], &word[end..])
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Replaces `tokens[index]` with a uniformly drawn synonym, keeping its
/// surrounding punctuation and initial capital. Returns false when the word
/// has no lexicon entry.
pub fn replace_at<R: Rng + ?Sized>(
    tokens: &mut [String],
    index: usize,
    lexicon: &SynonymLexicon,
    rng: &mut R,
) -> bool {
    let (pre, core, post) = word_core(&tokens[index]);
    let Some(synonyms) = lexicon.lookup(core) else {
        return false;
    };
    let choice = &synonyms[rng.random_range(0..synonyms.len())];
    let replaced = format!("{pre}{}{post}", match_case(core, choice));
    tokens[index] = replaced;
    true
}

/// Picks one token at random; if it has synonyms, replaces it with
/// probability `p_replace`.
pub fn synonym_replace_sentence<R: Rng + ?Sized>(
    tokens: &mut [String],
    lexicon: &SynonymLexicon,
    p_replace: f64,
    rng: &mut R,
) -> EditOutcome {
    if tokens.is_empty() {
        return EditOutcome::Skipped;
    }
    let index = rng.random_range(0..tokens.len());
    let (_, core, _) = word_core(&tokens[index]);
    if lexicon.lookup(core).is_none() {
        return EditOutcome::Skipped;
    }
    if !rng.random_bool(p_replace) {
        return EditOutcome::Declined;
    }
    replace_at(tokens, index, lexicon, rng);
    EditOutcome::Applied
}

/// Picks two distinct positions at random and swaps them with probability
/// `p_swap`. Sentences of fewer than two tokens are skipped.
pub fn random_swap_sentence<R: Rng + ?Sized>(
    tokens: &mut [String],
    p_swap: f64,
    rng: &mut R,
) -> EditOutcome {
    if tokens.len() < 2 {
        return EditOutcome::Skipped;
    }
    let i = rng.random_range(0..tokens.len());
    let mut j = rng.random_range(0..tokens.len() - 1);
    if j >= i {
        j += 1;
    }
    if !rng.random_bool(p_swap) {
        return EditOutcome::Declined;
    }
    tokens.swap(i, j);
    EditOutcome::Applied
}

/// Outcome of augmenting a single source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedText {
    pub text: String,
    pub target_edits: usize,
    pub applied_edits: usize,
    pub attempts: usize,
}

/// Applies single-sentence edits to `text` until the target count is reached
/// or the attempt budget runs out.
pub fn augment_text<R: Rng + ?Sized>(
    text: &str,
    config: &AugmentConfig,
    lexicon: &SynonymLexicon,
    rng: &mut R,
) -> AugmentedText {
    let mut sentences: Vec<Vec<String>> = split_sentences(text)
        .iter()
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect();
    let token_count: usize = sentences.iter().map(Vec::len).sum();
    let target = target_edit_count(token_count.max(1), config);
    let budget = ATTEMPTS_PER_EDIT * target;
    let (mut applied, mut attempts) = (0, 0);
    while applied < target && attempts < budget && !sentences.is_empty() {
        attempts += 1;
        let s = rng.random_range(0..sentences.len());
        let outcome = match config.mode {
            AugmentMode::SynonymReplacement => {
                synonym_replace_sentence(&mut sentences[s], lexicon, config.p_replace, rng)
            }
            AugmentMode::RandomSwapping => random_swap_sentence(&mut sentences[s], config.p_swap, rng),
        };
        if outcome == EditOutcome::Applied {
            applied += 1;
        }
    }
    let text = sentences
        .iter()
        .map(|s| s.join(" "))
        .collect::<Vec<_>>()
        .join(" ");
    AugmentedText {
        text,
        target_edits: target,
        applied_edits: applied,
        attempts,
    }
}

/// Generates `config.n` synthetic minority-class reports from `reports`.
///
/// Only the new reports are returned. Sample `k` uses its own sub-seed of
/// `config.seed`, so the output does not depend on evaluation order. The
/// synthetic id is `<source id>#aug<k>`.
pub fn augment_corpus(
    reports: &[Report],
    scheme: &LabelScheme,
    config: &AugmentConfig,
    lexicon: &SynonymLexicon,
) -> Result<Vec<Report>> {
    config.validate()?;
    if config.n == 0 {
        return Ok(Vec::new());
    }
    let minority: Vec<&Report> = reports
        .iter()
        .filter(|r| r.label == Some(scheme.minority_class))
        .collect();
    if minority.is_empty() {
        return Err(Error::Augmentation(format!(
            "no reports of minority class {} to augment",
            scheme.minority_class
        )));
    }
    Ok((0..config.n)
        .map(|k| {
            let mut rng = rng_from_seed(sub_seed(config.seed, k as u64));
            let source = minority[rng.random_range(0..minority.len())];
            let out = augment_text(&source.text, config, lexicon, &mut rng);
            Report {
                id: format!("{}#aug{k}", source.id),
                text: out.text,
                label: Some(scheme.minority_class),
                split: source.split,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64, aug_min: usize, aug_max: Option<usize>) -> AugmentConfig {
        AugmentConfig {
            p_replace: p,
            aug_min,
            aug_max,
            ..AugmentConfig::synonym(0)
        }
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn target_edit_count_worked_examples() {
        assert_eq!(target_edit_count(200, &cfg(0.8, 30, Some(100))), 100);
        assert_eq!(target_edit_count(200, &cfg(0.2, 30, None)), 40);
        assert_eq!(target_edit_count(10, &cfg(0.2, 30, None)), 30);
        assert_eq!(target_edit_count(7, &cfg(0.5, 1, None)), 4);
    }

    #[test]
    fn single_entry_lexicon_forces_replacement() {
        let lexicon = SynonymLexicon::new([("large", vec!["big"])]).unwrap();
        let mut tokens = toks(&["large", "clot", "seen"]);
        let mut rng = rng_from_seed(1);
        assert!(replace_at(&mut tokens, 0, &lexicon, &mut rng));
        assert_eq!(tokens, toks(&["big", "clot", "seen"]));
    }

    #[test]
    fn replacement_keeps_punctuation_and_case() {
        let lexicon = SynonymLexicon::new([("seen", vec!["noted"])]).unwrap();
        let mut tokens = toks(&["Seen."]);
        assert!(replace_at(&mut tokens, 0, &lexicon, &mut rng_from_seed(0)));
        assert_eq!(tokens, toks(&["Noted."]));
    }

    #[test]
    fn no_lexicon_hit_leaves_sentence_unchanged() {
        let lexicon = SynonymLexicon::new([("large", vec!["big"])]).unwrap();
        let original = toks(&["clot", "seen"]);
        let mut tokens = original.clone();
        for seed in 0..20 {
            let outcome = synonym_replace_sentence(&mut tokens, &lexicon, 1.0, &mut rng_from_seed(seed));
            assert_eq!(outcome, EditOutcome::Skipped);
        }
        assert_eq!(tokens, original);
    }

    #[test]
    fn every_synonym_is_reachable() {
        let lexicon = SynonymLexicon::new([
            ("large", vec!["big", "sizeable"]),
            ("seen", vec!["noted", "observed", "visualized"]),
            ("clot", vec!["thrombus"]),
        ])
        .unwrap();
        let expected: std::collections::BTreeSet<String> = lexicon
            .iter()
            .flat_map(|(_, syns)| syns.iter().cloned())
            .collect();
        let mut produced = std::collections::BTreeSet::new();
        for seed in 0..1000 {
            let mut tokens = toks(&["large", "clot", "seen"]);
            let mut rng = rng_from_seed(seed);
            if synonym_replace_sentence(&mut tokens, &lexicon, 1.0, &mut rng) == EditOutcome::Applied {
                assert_eq!(tokens.len(), 3);
                produced.extend(tokens.into_iter().filter(|t| expected.contains(t)));
            }
        }
        assert_eq!(produced, expected);
    }

    #[test]
    fn two_token_forced_swap() {
        let mut tokens = toks(&["a", "b"]);
        assert_eq!(random_swap_sentence(&mut tokens, 1.0, &mut rng_from_seed(5)), EditOutcome::Applied);
        assert_eq!(tokens, toks(&["b", "a"]));
        let mut single = toks(&["a"]);
        assert_eq!(random_swap_sentence(&mut single, 1.0, &mut rng_from_seed(5)), EditOutcome::Skipped);
    }

    #[test]
    fn declined_swap_changes_nothing() {
        let mut tokens = toks(&["a", "b", "c"]);
        assert_eq!(random_swap_sentence(&mut tokens, 0.0, &mut rng_from_seed(5)), EditOutcome::Declined);
        assert_eq!(tokens, toks(&["a", "b", "c"]));
    }

    #[test]
    fn swap_is_a_permutation() {
        for seed in 0..500 {
            let original = toks(&["there", "is", "a", "filling", "defect", "."]);
            let mut tokens = original.clone();
            random_swap_sentence(&mut tokens, 1.0, &mut rng_from_seed(seed));
            let diffs = original.iter().zip(&tokens).filter(|(a, b)| a != b).count();
            assert_eq!(diffs, 2);
            let (mut a, mut b) = (original.clone(), tokens.clone());
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn augment_corpus_counts_labels_and_ids() {
        let scheme = LabelScheme::pe();
        let reports = vec![
            Report::new("neg", "The heart is normal in size.", Some(0)),
            Report::new("pos", "Small filling defect seen in a segmental artery. Mild atelectasis.", Some(1)),
        ];
        let config = AugmentConfig {
            n: 200,
            ..AugmentConfig::synonym(11)
        };
        let out = augment_corpus(&reports, &scheme, &config, &SynonymLexicon::demo()).unwrap();
        assert_eq!(out.len(), 200);
        assert!(out.iter().all(|r| r.label == Some(1) && r.id.starts_with("pos#aug")));
        assert_eq!(out, augment_corpus(&reports, &scheme, &config, &SynonymLexicon::demo()).unwrap());

        let none = AugmentConfig { n: 0, ..config.clone() };
        assert!(augment_corpus(&reports, &scheme, &none, &SynonymLexicon::demo()).unwrap().is_empty());
        assert!(matches!(
            augment_corpus(&reports[..1], &scheme, &config, &SynonymLexicon::demo()),
            Err(Error::Augmentation(_))
        ));
    }

    #[test]
    fn edit_loop_is_bounded_on_degenerate_text() {
        let config = AugmentConfig::synonym(3);
        let out = augment_text("Xyz.", &config, &SynonymLexicon::demo(), &mut rng_from_seed(1));
        assert_eq!(out.applied_edits, 0);
        assert_eq!(out.attempts, ATTEMPTS_PER_EDIT * 30);
        assert_eq!(out.text, "Xyz.");
    }

    #[test]
    fn lexicon_parsing() {
        let lex = SynonymLexicon::from_tsv("# c\nBig\tlarge|big|Huge\n").unwrap();
        assert_eq!(lex.lookup("BIG").unwrap(), &["large".to_string(), "huge".to_string()]);
        assert!(SynonymLexicon::from_tsv("same\tsame\n").is_err());
        assert!(SynonymLexicon::from_tsv("notab\n").is_err());
        let ppdb = SynonymLexicon::from_ppdb(
            "[JJ] ||| large ||| big ||| 0.1 ||| 0-0 ||| Equivalence\n[NP] ||| the clot ||| a thrombus ||| x\n",
        )
        .unwrap();
        assert_eq!(ppdb.lookup("large").unwrap(), &["big".to_string()]);
        assert_eq!(ppdb.len(), 1);
        assert!(SynonymLexicon::demo().len() > 10);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.5, 30, None).validate().is_err());
        assert!(cfg(0.5, 0, None).validate().is_err());
        assert!(cfg(0.5, 30, Some(10)).validate().is_err());
        assert!(AugmentConfig::swap(0).validate().is_ok());
    }
}
