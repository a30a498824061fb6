//! Sentence segmentation and word tokenization.
//!
//! Tokenization is word level: runs of alphanumerics form tokens (a decimal
//! point between digits stays inside the token), and every other
//! non-whitespace character is a token of its own. A classification token is
//! prepended and occupies one slot of `max_len`, so the content budget is
//! `max_len - 1`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CLS_TOKEN: &str = "[CLS]";
pub const PAD_TOKEN: &str = "[PAD]";

/// Abbreviations whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "vs", "approx", "fig", "pt", "hx", "dx", "cf", "e.g", "i.e", "incl",
    "esp", "resp",
];

/// Which end of an over-long sequence is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncateSide {
    /// Drop leading tokens, keeping the end of the report.
    Left,
    /// Drop trailing tokens.
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub max_len: usize,
    pub truncate_side: TruncateSide,
    #[serde(default = "default_true")]
    pub lowercase: bool,
    #[serde(default = "default_pad")]
    pub pad_token: String,
    #[serde(default = "default_cls")]
    pub cls_token: String,
}

fn default_true() -> bool {
    true
}
fn default_pad() -> String {
    PAD_TOKEN.into()
}
fn default_cls() -> String {
    CLS_TOKEN.into()
}

impl TokenizerConfig {
    pub fn new(max_len: usize, truncate_side: TruncateSide) -> Self {
        TokenizerConfig {
            max_len,
            truncate_side,
            lowercase: true,
            pad_token: PAD_TOKEN.into(),
            cls_token: CLS_TOKEN.into(),
        }
    }

    /// Short structured ultrasound reports: 170 tokens, truncated on the right.
    pub fn dvt() -> Self {
        Self::new(170, TruncateSide::Right)
    }

    /// Long CT reports: 512 tokens, truncated on the left so the impression
    /// at the end survives.
    pub fn pe() -> Self {
        Self::new(512, TruncateSide::Left)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "dvt" => Ok(Self::dvt()),
            "pe" => Ok(Self::pe()),
            other => Err(Error::Config(format!("unknown tokenizer preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len < 2 {
            return Err(Error::Config(format!(
                "max_len must be at least 2, got {}",
                self.max_len
            )));
        }
        if self.pad_token == self.cls_token {
            return Err(Error::Config("pad and cls tokens must differ".into()));
        }
        Ok(())
    }
}

/// A tokenized, truncated and padded report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub cls_present: bool,
    /// Number of content tokens before truncation.
    pub original_length: usize,
    pub pad_length: usize,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens before the padding (classification token included).
    pub fn valid_len(&self) -> usize {
        self.tokens.len() - self.pad_length
    }

    pub fn valid_tokens(&self) -> &[String] {
        &self.tokens[..self.valid_len()]
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits free text into sentences at `.`, `!`, `?` and newlines.
///
/// A period followed directly by a non-space character (decimals, `e.g`) or
/// ending a known abbreviation is not a boundary. Sentences are trimmed;
/// removing whitespace from their concatenation gives the input with
/// whitespace removed.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    let push = |from: usize, to: usize, out: &mut Vec<String>| {
        let s = text[from..to].trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    };

    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            push(start, pos, &mut sentences);
            start = pos + 1;
            i += 1;
            continue;
        }
        if is_terminator(c) {
            let next = chars.get(i + 1).map(|&(_, n)| n);
            let glued = next.is_some_and(|n| !n.is_whitespace() && !is_terminator(n) && !is_closer(n));
            if c == '.' && (glued || ends_with_abbreviation(&text[start..pos])) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            push(start, end, &mut sentences);
            start = end;
            i = j;
            continue;
        }
        i += 1;
    }
    push(start, text.len(), &mut sentences);
    sentences
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'')
}

fn ends_with_abbreviation(prefix: &str) -> bool {
    let word: String = prefix
        .chars()
        .rev()
        .take_while(|c| c.is_alphanumeric() || *c == '.')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let word = word.to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Word tokens of `text` without special tokens, truncation or padding.
pub fn word_tokens(text: &str, lowercase: bool) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
            continue;
        }
        let decimal_point = c == '.'
            && current.chars().last().is_some_and(|p| p.is_ascii_digit())
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if decimal_point {
            current.push(c);
            continue;
        }
        if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    if lowercase {
        for t in &mut tokens {
            *t = t.to_lowercase();
        }
    }
    tokens
}

/// Tokenizes, truncates and pads `text` to exactly `config.max_len` tokens.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> TokenSeq {
    let content = word_tokens(text, config.lowercase);
    let original_length = content.len();
    let budget = config.max_len.saturating_sub(1);
    let kept: &[String] = if content.len() <= budget {
        &content
    } else {
        match config.truncate_side {
            TruncateSide::Right => &content[..budget],
            TruncateSide::Left => &content[content.len() - budget..],
        }
    };
    let mut tokens = Vec::with_capacity(config.max_len);
    tokens.push(config.cls_token.clone());
    tokens.extend(kept.iter().cloned());
    let pad_length = config.max_len - tokens.len();
    tokens.extend(std::iter::repeat_n(config.pad_token.clone(), pad_length));
    TokenSeq {
        tokens,
        cls_present: true,
        original_length,
        pad_length,
    }
}
