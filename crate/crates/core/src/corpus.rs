//! CoNLL corpus ingestion: sentences with BIO labels, label sets,
//! vocabularies, and corpus statistics.
//!
//! Only the first column (token) and last column (tag) of a CoNLL row are
//! used; middle columns are ignored for portability across corpora with
//! different column conventions. Tags must be raw BIO — `O`, `B-<TYPE>` or
//! `I-<TYPE>` — and other schemes are rejected, not converted.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// One tokenized sentence with per-token BIO labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
}

impl Sentence {
    /// Validates the invariants: nonempty, parallel lengths, BIO tag syntax.
    pub fn new(tokens: Vec<String>, labels: Vec<String>) -> Result<Sentence> {
        if tokens.is_empty() {
            return Err(Error::Invalid("sentence has no tokens".into()));
        }
        if tokens.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} tokens vs {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        for tag in &labels {
            validate_tag(tag).map_err(|msg| Error::Invalid(format!("invalid tag `{tag}`: {msg}")))?;
        }
        Ok(Sentence { tokens, labels })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of tokens labeled anything other than "O".
    pub fn entity_token_count(&self) -> usize {
        self.labels.iter().filter(|l| *l != "O").count()
    }
}

/// A named collection of sentences; always holds at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Result<Corpus> {
        if sentences.is_empty() {
            return Err(Error::Invalid("no sentences".into()));
        }
        Ok(Corpus {
            name: name.into(),
            sentences,
        })
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// Checks `O` / `B-<TYPE>` / `I-<TYPE>` syntax with nonempty TYPE.
fn validate_tag(tag: &str) -> std::result::Result<(), &'static str> {
    if tag == "O" {
        return Ok(());
    }
    match tag.split_once('-') {
        Some(("B" | "I", ty)) if !ty.is_empty() => Ok(()),
        Some(("B" | "I", _)) => Err("empty entity type"),
        _ => Err("expected O, B-<TYPE> or I-<TYPE>"),
    }
}

/// Reads a whitespace-column CoNLL file; blank lines separate sentences,
/// `-DOCSTART-` lines are skipped. The corpus is named by the file stem.
pub fn load_conll(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| display.clone());

    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !tokens.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut tokens),
                    labels: std::mem::take(&mut labels),
                });
            }
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() < 2 {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                msg: format!("expected at least 2 columns, got {}", cols.len()),
            });
        }
        let tag = cols[cols.len() - 1];
        validate_tag(tag).map_err(|msg| Error::Parse {
            path: display.clone(),
            line: lineno,
            msg: format!("invalid tag `{tag}`: {msg}"),
        })?;
        tokens.push(cols[0].to_string());
        labels.push(tag.to_string());
    }
    if !tokens.is_empty() {
        sentences.push(Sentence { tokens, labels });
    }
    if sentences.is_empty() {
        return Err(Error::Parse {
            path: display,
            line: text.lines().count(),
            msg: "no sentences".into(),
        });
    }
    Ok(Corpus { name, sentences })
}

/// Writes two-column `token tag` CoNLL with blank lines between sentences.
/// Round-trips through [`load_conll`] exactly (middle columns of the source,
/// if any, are not preserved).
pub fn write_conll(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for sentence in &corpus.sentences {
        for (token, tag) in sentence.tokens.iter().zip(&sentence.labels) {
            writeln!(out, "{token} {tag}").expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The K tags of a corpus in a fixed order: "O" first, the rest
/// lexicographic. The position of a tag is its head index everywhere else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    /// Builds from an explicit ordered list, validating the ordering
    /// invariant (used when reading a model file back).
    pub fn from_labels(labels: Vec<String>) -> Result<LabelSet> {
        if labels.first().map(String::as_str) != Some("O") {
            return Err(Error::Invalid("label set must start with O".into()));
        }
        if !labels[1..].windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invalid(
                "label set after O must be strictly sorted".into(),
            ));
        }
        for tag in &labels[1..] {
            validate_tag(tag).map_err(|msg| Error::Invalid(format!("invalid tag `{tag}`: {msg}")))?;
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Ok(LabelSet { labels, index })
    }

    /// Number of labels K.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // "O" is always present
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }
}

/// Collects the observed tags plus "O"; deterministic regardless of sentence
/// order.
pub fn build_label_set(corpus: &Corpus) -> LabelSet {
    let mut labels: Vec<String> = corpus
        .sentences
        .iter()
        .flat_map(|s| s.labels.iter())
        .filter(|l| *l != "O")
        .cloned()
        .collect();
    labels.sort();
    labels.dedup();
    labels.insert(0, "O".to_string());
    LabelSet::from_labels(labels).expect("constructed sorted with O first")
}

/// Number of distinct token case patterns.
pub const CASE_PATTERNS: usize = 5;

/// Surface-shape feature of a token. Precedence: a digit anywhere wins, then
/// pure-lower, pure-upper (so "EU" and "I" land here, not in init-cap), then
/// leading capital; everything else (punctuation, mixed like "iPhone") is
/// Other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasePattern {
    AllLower,
    AllUpper,
    InitCap,
    HasDigit,
    Other,
}

impl CasePattern {
    pub fn of(token: &str) -> CasePattern {
        if token.chars().any(|c| c.is_numeric()) {
            return CasePattern::HasDigit;
        }
        let any_lower = token.chars().any(|c| c.is_lowercase());
        let any_upper = token.chars().any(|c| c.is_uppercase());
        if any_lower && !any_upper {
            return CasePattern::AllLower;
        }
        if any_upper && !any_lower {
            return CasePattern::AllUpper;
        }
        if token.chars().next().is_some_and(|c| c.is_uppercase()) {
            return CasePattern::InitCap;
        }
        CasePattern::Other
    }

    /// Fixed embedding row for the pattern.
    pub fn id(self) -> usize {
        match self {
            CasePattern::AllLower => 0,
            CasePattern::AllUpper => 1,
            CasePattern::InitCap => 2,
            CasePattern::HasDigit => 3,
            CasePattern::Other => 4,
        }
    }
}

/// Lowercased word → dense id map with a reserved unk id (== `len()`).
/// Case information travels separately via [`CasePattern`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, usize>,
    min_count: usize,
}

impl Vocabulary {
    /// Rebuilds from an id-ordered word list (model file loading); the list
    /// must be strictly sorted, which is what construction produces.
    pub fn from_words(words: Vec<String>, min_count: usize) -> Result<Vocabulary> {
        if !words.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invalid("vocabulary words must be strictly sorted".into()));
        }
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(Vocabulary {
            words,
            ids,
            min_count,
        })
    }

    /// Number of stored words, excluding unk.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn unk_id(&self) -> usize {
        self.words.len()
    }

    /// Id for a surface token: lowercased lookup, unk when absent.
    pub fn word_id(&self, token: &str) -> usize {
        self.ids
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(self.unk_id())
    }

    /// Words in id order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }
}

/// Counts lowercased tokens and keeps those occurring at least `min_count`
/// times; ids are dense in lexicographic order.
pub fn build_vocabulary(corpus: &Corpus, min_count: usize) -> Vocabulary {
    assert!(min_count >= 1, "min_count must be at least 1");
    let mut counts: HashMap<String, usize> = HashMap::new();
    for sentence in &corpus.sentences {
        for token in &sentence.tokens {
            *counts.entry(token.to_lowercase()).or_insert(0) += 1;
        }
    }
    let mut words: Vec<String> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .map(|(w, _)| w)
        .collect();
    words.sort();
    Vocabulary::from_words(words, min_count).expect("sorted unique by construction")
}

/// Exact counts plus B/I/O percentage views of a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub b_tokens: usize,
    pub i_tokens: usize,
    pub o_tokens: usize,
    /// Sentences containing at least one non-"O" token.
    pub entity_sentences: usize,
}

impl CorpusStats {
    pub fn pct_b(&self) -> f64 {
        100.0 * self.b_tokens as f64 / self.tokens as f64
    }

    pub fn pct_i(&self) -> f64 {
        100.0 * self.i_tokens as f64 / self.tokens as f64
    }

    pub fn pct_o(&self) -> f64 {
        100.0 * self.o_tokens as f64 / self.tokens as f64
    }

    pub fn pct_entity_sentences(&self) -> f64 {
        100.0 * self.entity_sentences as f64 / self.sentences as f64
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        sentences: corpus.sentences.len(),
        tokens: 0,
        b_tokens: 0,
        i_tokens: 0,
        o_tokens: 0,
        entity_sentences: 0,
    };
    for sentence in &corpus.sentences {
        stats.tokens += sentence.len();
        let mut has_entity = false;
        for label in &sentence.labels {
            if label == "O" {
                stats.o_tokens += 1;
            } else if label.starts_with("B-") {
                stats.b_tokens += 1;
                has_entity = true;
            } else {
                stats.i_tokens += 1;
                has_entity = true;
            }
        }
        if has_entity {
            stats.entity_sentences += 1;
        }
    }
    stats
}

/// ±1 view of a sentence for one head: +1 where the token carries exactly
/// `label`, −1 elsewhere.
pub fn binarize_labels(sentence: &Sentence, label: &str, label_set: &LabelSet) -> Result<Vec<i8>> {
    if label_set.index_of(label).is_none() {
        return Err(Error::Invalid(format!("unknown label `{label}`")));
    }
    Ok(sentence
        .labels
        .iter()
        .map(|l| if l == label { 1 } else { -1 })
        .collect())
}
