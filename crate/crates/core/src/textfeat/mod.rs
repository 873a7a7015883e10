//! Headline tokenization and clickbait feature extraction.
//!
//! All rules here are deterministic and self-contained: the stopword list
//! ships with the crate (`stopwords.txt`, versioned), lexicons are plain
//! term/weight tables supplied by the caller, and no external NLP stack is
//! involved. Feature semantics worth pinning down:
//!
//! - tokens split on whitespace, with the punctuation characters
//!   `. , ! ? ; : " ' —` peeled off as single-character tokens (so
//!   contractions split: `won't` -> `won`, `'`, `t`);
//! - "word" tokens are the non-punctuation tokens;
//! - `forward_reference` is the demonstrative simplification (`this`,
//!   `that`, `these`, `those`, any casing) — an approximation of true
//!   forward reference;
//! - `contains_quote` looks for a double-quote character in the raw
//!   headline; apostrophes are too ambiguous to count as quotation;
//! - `contains_number` fires on any token containing an ASCII digit, while
//!   the `number` headline type requires the first token to parse as an
//!   integer.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, RowError};
use crate::Result;

const STOPWORDS_FILE: &str = include_str!("stopwords.txt");

const PUNCTUATION: [char; 9] = ['.', ',', '!', '?', ';', ':', '"', '\'', '—'];

const SENTENCE_TERMINALS: [&str; 3] = [".", "!", "?"];

const PRONOUNS: [&str; 31] = [
    "i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves", "you", "your",
    "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers",
    "herself", "it", "its", "itself", "they", "them", "their", "theirs", "themselves",
];

const DEMONSTRATIVES: [&str; 4] = ["this", "that", "these", "those"];

const YOU_FORMS: [&str; 3] = ["you", "your", "you're"];

const QUESTION_STARTERS: [&str; 12] = [
    "who", "what", "when", "where", "why", "how", "is", "are", "do", "does", "can", "should",
];

/// Names of the formal features in canonical column order.
pub const FORMAL_FEATURE_NAMES: [&str; 16] = [
    "n_chars",
    "n_words",
    "avg_word_len",
    "n_sentences",
    "n_exclamation",
    "n_question_mark",
    "n_dots",
    "contains_number",
    "contains_pronoun",
    "contains_you",
    "starts_how_to",
    "starts_interrogative",
    "contains_quote",
    "stopword_ratio",
    "forward_reference",
    "all_caps_word",
];

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word.to_lowercase().as_str())
}

/// One A/B-tested presentation of a story.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageRecord {
    pub test_id: String,
    pub headline: String,
    pub lede: Option<String>,
    pub impressions: u64,
    pub clicks: u64,
}

impl PackageRecord {
    pub fn validate(&self) -> Result<()> {
        if self.headline.trim().is_empty() {
            return Err(Error::invalid("headline is empty"));
        }
        if self.clicks > self.impressions {
            return Err(Error::invalid(format!(
                "clicks ({}) exceed impressions ({})",
                self.clicks, self.impressions
            )));
        }
        Ok(())
    }

    pub fn ctr(&self) -> Option<f64> {
        (self.impressions > 0).then(|| self.clicks as f64 / self.impressions as f64)
    }
}

/// A named term -> weight table for lexicon scoring. Terms are lowercase
/// and unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: String,
    pub entries: BTreeMap<String, f64>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let name = name.into();
        let mut map = BTreeMap::new();
        for (term, weight) in entries {
            if term.is_empty() {
                return Err(Error::invalid(format!("lexicon {name}: empty term")));
            }
            if term != term.to_lowercase() {
                return Err(Error::invalid(format!(
                    "lexicon {name}: term {term:?} is not lowercase"
                )));
            }
            if map.insert(term.clone(), weight).is_some() {
                return Err(Error::invalid(format!(
                    "lexicon {name}: duplicate term {term:?}"
                )));
            }
        }
        if map.is_empty() {
            return Err(Error::invalid(format!("lexicon {name} has no entries")));
        }
        Ok(Lexicon { name, entries: map })
    }
}

/// What a feature column means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Formal,
    Lexicon,
    Topic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub index: usize,
    pub name: String,
    pub kind: FeatureKind,
}

/// Rows = packages, columns = extracted feature weights, outcome = CTR.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub descriptors: Vec<FeatureDescriptor>,
    pub rows: Array2<f64>,
    pub outcomes: Vec<f64>,
    pub row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn descriptor_names(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.name.clone()).collect()
    }
}

/// Whitespace split with punctuation peeled into single-character tokens.
/// Casing is preserved. Empty input gives an empty list.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if PUNCTUATION.contains(&c) {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            } else {
                word.push(c);
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

fn is_punct_token(token: &str) -> bool {
    token.chars().count() == 1 && token.chars().all(|c| PUNCTUATION.contains(&c))
}

fn is_alphabetic_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(char::is_alphabetic)
}

/// The five headline types, with match precedence
/// howto > number > question > reader > normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadlineType {
    Normal,
    Question,
    Howto,
    Number,
    Reader,
}

impl HeadlineType {
    pub const ALL: [HeadlineType; 5] = [
        HeadlineType::Normal,
        HeadlineType::Question,
        HeadlineType::Howto,
        HeadlineType::Number,
        HeadlineType::Reader,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeadlineType::Normal => "normal",
            HeadlineType::Question => "question",
            HeadlineType::Howto => "howto",
            HeadlineType::Number => "number",
            HeadlineType::Reader => "reader",
        }
    }
}

/// Classifies a headline into exactly one type.
pub fn classify_headline_type(headline: &str) -> HeadlineType {
    let tokens = tokenize(headline);
    let words: Vec<String> = tokens
        .iter()
        .filter(|t| !is_punct_token(t))
        .map(|t| t.to_lowercase())
        .collect();

    if words.len() >= 2 && words[0] == "how" && words[1] == "to" {
        return HeadlineType::Howto;
    }
    if words.first().map_or(false, |w| w.parse::<i64>().is_ok()) {
        return HeadlineType::Number;
    }
    let ends_question = tokens.last().map_or(false, |t| t == "?");
    let starts_question = words
        .first()
        .map_or(false, |w| QUESTION_STARTERS.contains(&w.as_str()));
    if ends_question || starts_question {
        return HeadlineType::Question;
    }
    if words.iter().any(|w| YOU_FORMS.contains(&w.as_str())) {
        return HeadlineType::Reader;
    }
    HeadlineType::Normal
}

/// Computes the 16 formal features. Deterministic; always returns exactly
/// the keys in [`FORMAL_FEATURE_NAMES`].
pub fn extract_formal(headline: &str) -> Result<BTreeMap<&'static str, f64>> {
    let trimmed = headline.trim();
    if trimmed.is_empty() {
        return Err(Error::invalid("cannot extract features from an empty headline"));
    }
    let tokens = tokenize(trimmed);
    let words: Vec<&String> = tokens.iter().filter(|t| !is_punct_token(t)).collect();
    let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();

    let n_chars = trimmed.chars().count();
    let n_words = words.len();
    let total_word_len: usize = words.iter().map(|w| w.chars().count()).sum();
    let avg_word_len = if n_words > 0 {
        total_word_len as f64 / n_words as f64
    } else {
        0.0
    };

    // sentences = token segments holding at least one word, delimited by
    // . ! ? tokens
    let mut n_sentences = 0u32;
    let mut segment_has_word = false;
    for token in &tokens {
        if SENTENCE_TERMINALS.contains(&token.as_str()) {
            if segment_has_word {
                n_sentences += 1;
                segment_has_word = false;
            }
        } else if !is_punct_token(token) {
            segment_has_word = true;
        }
    }
    if segment_has_word {
        n_sentences += 1;
    }

    let count_token = |p: &str| tokens.iter().filter(|t| *t == p).count() as f64;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };

    let stop_hits = lower.iter().filter(|w| stopwords().contains(w.as_str())).count();
    let stopword_ratio = if n_words > 0 {
        stop_hits as f64 / n_words as f64
    } else {
        0.0
    };

    let mut features = BTreeMap::new();
    features.insert("n_chars", n_chars as f64);
    features.insert("n_words", n_words as f64);
    features.insert("avg_word_len", avg_word_len);
    features.insert("n_sentences", n_sentences as f64);
    features.insert("n_exclamation", count_token("!"));
    features.insert("n_question_mark", count_token("?"));
    features.insert("n_dots", count_token("."));
    features.insert(
        "contains_number",
        flag(tokens.iter().any(|t| t.chars().any(|c| c.is_ascii_digit()))),
    );
    features.insert(
        "contains_pronoun",
        flag(lower.iter().any(|w| PRONOUNS.contains(&w.as_str()))),
    );
    features.insert(
        "contains_you",
        flag(lower.iter().any(|w| YOU_FORMS.contains(&w.as_str()))),
    );
    features.insert(
        "starts_how_to",
        flag(lower.len() >= 2 && lower[0] == "how" && lower[1] == "to"),
    );
    features.insert(
        "starts_interrogative",
        flag(lower.first().map_or(false, |w| QUESTION_STARTERS.contains(&w.as_str()))),
    );
    features.insert("contains_quote", flag(trimmed.contains('"')));
    features.insert("stopword_ratio", stopword_ratio);
    features.insert(
        "forward_reference",
        flag(lower.iter().any(|w| DEMONSTRATIVES.contains(&w.as_str()))),
    );
    features.insert(
        "all_caps_word",
        flag(words.iter().any(|w| {
            w.chars().count() >= 2 && w.chars().all(|c| c.is_alphabetic() && c.is_uppercase())
        })),
    );
    debug_assert_eq!(features.len(), FORMAL_FEATURE_NAMES.len());
    Ok(features)
}

/// Mean matched weight over the alphabetic tokens:
/// sum of weights of matched lowercased alphabetic tokens divided by the
/// count of alphabetic tokens. Zero for empty or all-punctuation input.
pub fn score_lexicon(tokens: &[String], lexicon: &Lexicon) -> f64 {
    let alphabetic: Vec<String> = tokens
        .iter()
        .filter(|t| is_alphabetic_token(t))
        .map(|t| t.to_lowercase())
        .collect();
    if alphabetic.is_empty() {
        return 0.0;
    }
    let total: f64 = alphabetic
        .iter()
        .filter_map(|t| lexicon.entries.get(t))
        .sum();
    total / alphabetic.len() as f64
}

/// Per-record topic proportions to append as feature columns.
pub struct TopicColumns {
    /// record count x K matrix.
    pub values: Array2<f64>,
}

/// Assembles the feature matrix: 16 formal columns, one column per lexicon,
/// 5 headline-type indicators, then optional topic columns. Row order
/// matches the input records; the outcome is the raw CTR clicks/impressions.
pub fn build_matrix(
    records: &[PackageRecord],
    lexicons: &[Lexicon],
    topic_columns: Option<&TopicColumns>,
) -> Result<FeatureMatrix> {
    let mut row_errors = Vec::new();
    for (idx, record) in records.iter().enumerate() {
        let line = idx + 1;
        if record.impressions == 0 {
            row_errors.push(RowError {
                line,
                message: format!("package {}: zero impressions", record.test_id),
            });
        } else if record.clicks > record.impressions {
            row_errors.push(RowError {
                line,
                message: format!(
                    "package {}: clicks ({}) exceed impressions ({})",
                    record.test_id, record.clicks, record.impressions
                ),
            });
        }
        if record.headline.trim().is_empty() {
            row_errors.push(RowError {
                line,
                message: format!("package {}: empty headline", record.test_id),
            });
        }
    }
    if !row_errors.is_empty() {
        return Err(Error::Rows(row_errors));
    }
    if let Some(topics) = topic_columns {
        if topics.values.nrows() != records.len() {
            return Err(Error::invalid(format!(
                "topic columns have {} rows for {} records",
                topics.values.nrows(),
                records.len()
            )));
        }
    }

    let n_topics = topic_columns.map_or(0, |t| t.values.ncols());
    let mut descriptors = Vec::new();
    for name in FORMAL_FEATURE_NAMES {
        descriptors.push(FeatureDescriptor {
            index: descriptors.len(),
            name: name.to_string(),
            kind: FeatureKind::Formal,
        });
    }
    for lexicon in lexicons {
        descriptors.push(FeatureDescriptor {
            index: descriptors.len(),
            name: format!("lex_{}", lexicon.name),
            kind: FeatureKind::Lexicon,
        });
    }
    for ty in HeadlineType::ALL {
        descriptors.push(FeatureDescriptor {
            index: descriptors.len(),
            name: format!("type_{}", ty.as_str()),
            kind: FeatureKind::Formal,
        });
    }
    for t in 0..n_topics {
        descriptors.push(FeatureDescriptor {
            index: descriptors.len(),
            name: format!("topic_{t}"),
            kind: FeatureKind::Topic,
        });
    }

    let m = descriptors.len();
    let mut rows = Array2::zeros((records.len(), m));
    let mut outcomes = Vec::with_capacity(records.len());
    let mut row_ids = Vec::with_capacity(records.len());
    for (r, record) in records.iter().enumerate() {
        let formal = extract_formal(&record.headline)?;
        let tokens = tokenize(record.headline.trim());
        let headline_type = classify_headline_type(&record.headline);

        let mut col = 0;
        for name in FORMAL_FEATURE_NAMES {
            rows[(r, col)] = formal[name];
            col += 1;
        }
        for lexicon in lexicons {
            rows[(r, col)] = score_lexicon(&tokens, lexicon);
            col += 1;
        }
        for ty in HeadlineType::ALL {
            rows[(r, col)] = if ty == headline_type { 1.0 } else { 0.0 };
            col += 1;
        }
        if let Some(topics) = topic_columns {
            for t in 0..n_topics {
                rows[(r, col)] = topics.values[(r, t)];
                col += 1;
            }
        }
        outcomes.push(record.clicks as f64 / record.impressions as f64);
        row_ids.push(record.test_id.clone());
    }
    Ok(FeatureMatrix { descriptors, rows, outcomes, row_ids })
}
