//! Text normalization and bag-of-words construction.
//!
//! Normalization lowercases, tokenizes on non-alphanumeric boundaries,
//! strips date expressions, stopwords, numbers, and gazetteer names, then
//! lemmatizes. The output feeds [`build_vocabulary`] and [`to_bow`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TextPrepError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lemma dictionary {path} line {line}: expected `surface<TAB>lemma`")]
    MalformedLemma { path: String, line: usize },
    #[error("min_df must be at least 1, got {0}")]
    MinDfTooSmall(usize),
    #[error("max_df_ratio must be in (0, 1], got {0}")]
    MaxDfRatioOutOfRange(f64),
    #[error(
        "vocabulary is empty after pruning (min_df={min_df}, max_df_ratio={max_df_ratio}); \
         loosen the thresholds"
    )]
    EmptyVocabulary { min_df: usize, max_df_ratio: f64 },
}

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "itself", "me", "more", "most", "my", "myself", "no", "nor", "not", "of", "off",
    "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "with", "would", "you", "your",
    "yours", "yourself", "yourselves",
];

const DEFAULT_MONTHS: &[&str] = &[
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

/// Everything [`normalize`] consults: stop list, gazetteer, month names for
/// date-pattern removal, and the lemma dictionary.
///
/// All lookups happen after lowercasing, so entries are stored lowercased.
/// Multi-word gazetteer entries are split into their constituent tokens.
#[derive(Debug, Clone)]
pub struct NormalizeConfig {
    stopwords: HashSet<String>,
    gazetteer: HashSet<String>,
    months: HashSet<String>,
    lemmas: HashMap<String, String>,
    pub strip_suffixes: bool,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self::with_default_english()
    }
}

impl NormalizeConfig {
    pub fn empty() -> Self {
        Self {
            stopwords: HashSet::new(),
            gazetteer: HashSet::new(),
            months: DEFAULT_MONTHS.iter().map(|m| m.to_string()).collect(),
            lemmas: HashMap::new(),
            strip_suffixes: false,
        }
    }

    /// Built-in English stop list and month names, no gazetteer, no lemmas.
    pub fn with_default_english() -> Self {
        let mut config = Self::empty();
        config
            .stopwords
            .extend(DEFAULT_STOPWORDS.iter().map(|w| w.to_string()));
        config
    }

    pub fn add_stopwords<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, words: I) {
        for w in words {
            let w = w.as_ref().trim().to_lowercase();
            if !w.is_empty() {
                self.stopwords.insert(w);
            }
        }
    }

    /// Entries may span several words; each constituent token is blocked.
    pub fn add_gazetteer<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, entries: I) {
        for entry in entries {
            for token in entry.as_ref().split_whitespace() {
                self.gazetteer.insert(token.to_lowercase());
            }
        }
    }

    pub fn set_months<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, months: I) {
        self.months = months
            .into_iter()
            .map(|m| m.as_ref().trim().to_lowercase())
            .filter(|m| !m.is_empty())
            .collect();
    }

    /// Inserts lemma pairs. Chains (a→b, b→c) are resolved to their final
    /// form on insertion so that re-lemmatizing output is a no-op.
    pub fn add_lemmas<I: IntoIterator<Item = (S, S)>, S: AsRef<str>>(&mut self, pairs: I) {
        for (surface, lemma) in pairs {
            self.lemmas.insert(
                surface.as_ref().trim().to_lowercase(),
                lemma.as_ref().trim().to_lowercase(),
            );
        }
        self.resolve_lemma_chains();
    }

    fn resolve_lemma_chains(&mut self) {
        let keys: Vec<String> = self.lemmas.keys().cloned().collect();
        for key in keys {
            let mut current = self.lemmas[&key].clone();
            let mut visited = HashSet::new();
            visited.insert(key.clone());
            while let Some(next) = self.lemmas.get(&current) {
                if next == &current || !visited.insert(current.clone()) {
                    break;
                }
                current = next.clone();
            }
            self.lemmas.insert(key, current);
        }
    }

    pub fn add_stopwords_file(&mut self, path: impl AsRef<Path>) -> Result<(), TextPrepError> {
        let lines = read_lines(path.as_ref())?;
        self.add_stopwords(lines);
        Ok(())
    }

    pub fn add_gazetteer_file(&mut self, path: impl AsRef<Path>) -> Result<(), TextPrepError> {
        let lines = read_lines(path.as_ref())?;
        self.add_gazetteer(lines);
        Ok(())
    }

    /// Loads `surface<TAB>lemma` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn add_lemmas_file(&mut self, path: impl AsRef<Path>) -> Result<(), TextPrepError> {
        let path = path.as_ref();
        let mut pairs = Vec::new();
        for (idx, line) in read_lines(path)?.into_iter().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(2, '\t');
            match (parts.next(), parts.next()) {
                (Some(surface), Some(lemma))
                    if !surface.trim().is_empty() && !lemma.trim().is_empty() =>
                {
                    pairs.push((surface.to_string(), lemma.to_string()));
                }
                _ => {
                    return Err(TextPrepError::MalformedLemma {
                        path: path.display().to_string(),
                        line: idx + 1,
                    })
                }
            }
        }
        self.add_lemmas(pairs);
        Ok(())
    }

    fn is_month(&self, token: &str) -> bool {
        self.months.contains(token)
    }

    fn lemmatize(&self, token: &str) -> String {
        if let Some(lemma) = self.lemmas.get(token) {
            return lemma.clone();
        }
        if self.strip_suffixes {
            return strip_suffixes(token);
        }
        token.to_string()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, TextPrepError> {
    let file = File::open(path).map_err(|source| TextPrepError::Io {
        path: path.display().to_string(),
        source,
    })?;
    BufReader::new(file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| TextPrepError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Crude English suffix stripper. Rules are applied until none fires, so
/// stripping the output again changes nothing.
fn strip_suffixes(token: &str) -> String {
    let mut word = token.to_string();
    loop {
        let stripped = strip_one(&word);
        if stripped == word {
            return word;
        }
        word = stripped;
    }
}

fn strip_one(word: &str) -> String {
    let n = word.len();
    if let Some(stem) = word.strip_suffix("sses") {
        return format!("{stem}ss");
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    for suffix in ["ing", "ed", "ly", "ment"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if stem.len() >= 3 {
                return stem.to_string();
            }
        }
    }
    if word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && n >= 4 {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

fn is_pure_number(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

fn contains_digit(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit())
}

/// Drops `3 may 1999` (day month year) and `may 1999` (month year) runs
/// from the token stream. Day tokens are 1 or 2 digits, years exactly 4.
fn remove_date_patterns(tokens: Vec<String>, config: &NormalizeConfig) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let day_month_year = i + 2 < tokens.len()
            && is_pure_number(&tokens[i])
            && tokens[i].len() <= 2
            && config.is_month(&tokens[i + 1])
            && is_pure_number(&tokens[i + 2])
            && tokens[i + 2].len() == 4;
        if day_month_year {
            i += 3;
            continue;
        }
        let month_year = i + 1 < tokens.len()
            && config.is_month(&tokens[i])
            && is_pure_number(&tokens[i + 1])
            && tokens[i + 1].len() == 4;
        if month_year {
            i += 2;
            continue;
        }
        out.push(tokens[i].clone());
        i += 1;
    }
    out
}

fn passes_filters(token: &str, config: &NormalizeConfig) -> bool {
    token.chars().count() >= 2
        && !contains_digit(token)
        && !config.stopwords.contains(token)
        && !config.gazetteer.contains(token)
        && !config.is_month(token)
}

/// Normalizes raw text to a token list.
///
/// Lowercases, splits on non-alphanumeric boundaries, removes date
/// expressions, numbers, stopwords, month and gazetteer names, and
/// single-character tokens, then lemmatizes. Lemma output is passed through
/// the same filters so the function is idempotent on its own output.
pub fn normalize(text: &str, config: &NormalizeConfig) -> Vec<String> {
    let lowered = text.to_lowercase();
    let tokens: Vec<String> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    let tokens = remove_date_patterns(tokens, config);
    tokens
        .into_iter()
        .filter(|t| passes_filters(t, config))
        .map(|t| config.lemmatize(&t))
        .filter(|t| passes_filters(t, config))
        .collect()
}

/// Word-to-id mapping with per-word document frequencies.
///
/// Ids are dense, 0-based, and assigned in lexicographic word order, so the
/// mapping depends only on the word set, never on document order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "VocabularyRepr", from = "VocabularyRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, usize>,
    doc_freq: Vec<usize>,
}

/// On-disk form; the id map is rebuilt from word order on load.
#[derive(Clone, Serialize, Deserialize)]
struct VocabularyRepr {
    words: Vec<String>,
    doc_freq: Vec<usize>,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            words: v.words,
            doc_freq: v.doc_freq,
        }
    }
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_sorted(r.words, r.doc_freq)
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && self.doc_freq == other.doc_freq
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    fn from_sorted(words: Vec<String>, doc_freq: Vec<usize>) -> Self {
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self {
            words,
            ids,
            doc_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn doc_freq(&self, id: usize) -> Option<usize> {
        self.doc_freq.get(id).copied()
    }
}

/// Builds the vocabulary of words whose document frequency lies in
/// `[min_df, max_df_ratio * doc_count]`.
pub fn build_vocabulary(
    token_lists: &[Vec<String>],
    min_df: usize,
    max_df_ratio: f64,
) -> Result<Vocabulary, TextPrepError> {
    if min_df < 1 {
        return Err(TextPrepError::MinDfTooSmall(min_df));
    }
    if !(max_df_ratio > 0.0 && max_df_ratio <= 1.0) {
        return Err(TextPrepError::MaxDfRatioOutOfRange(max_df_ratio));
    }

    let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in token_lists {
        let unique: HashSet<&str> = tokens.iter().map(String::as_str).collect();
        for word in unique {
            *doc_freq.entry(word).or_insert(0) += 1;
        }
    }

    let max_df = max_df_ratio * token_lists.len() as f64;
    let mut words = Vec::new();
    let mut freqs = Vec::new();
    for (word, df) in doc_freq {
        if df >= min_df && df as f64 <= max_df {
            words.push(word.to_string());
            freqs.push(df);
        }
    }
    if words.is_empty() {
        return Err(TextPrepError::EmptyVocabulary {
            min_df,
            max_df_ratio,
        });
    }
    Ok(Vocabulary::from_sorted(words, freqs))
}

/// Sparse word counts, sorted by word id.
pub type BowVector = Vec<(usize, u32)>;

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are dropped.
pub fn to_bow(tokens: &[String], vocab: &Vocabulary) -> BowVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for token in tokens {
        if let Some(id) = vocab.id(token) {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    counts.into_iter().collect()
}

/// Maps each token list to its bag-of-words vector under one vocabulary.
pub fn documents_to_bows(token_lists: &[Vec<String>], vocab: &Vocabulary) -> Vec<BowVector> {
    token_lists.iter().map(|t| to_bow(t, vocab)).collect()
}
