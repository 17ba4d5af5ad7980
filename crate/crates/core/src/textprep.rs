//! Normalization of raw bank-transaction descriptions into lemma sequences.
//!
//! The pipeline runs, in order: acronym expansion, symbol and diacritic
//! stripping, number and code removal, whitespace tokenization, stopword
//! removal and lemmatization. Expansion runs first so dotted acronyms such as
//! `E.S.` are still recognisable before periods are turned into spaces.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Mixed letter/digit tokens of at least four characters.
pub const DEFAULT_CODE_PATTERN: &str = r"^(?=.*[a-z])(?=.*[0-9])[a-z0-9]{4,}$";

const SHIPPED_CONFIG: &str = include_str!("../data/normalization.json");

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("cannot read normalization config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid normalization config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid code pattern {pattern:?}: {message}")]
    Pattern { pattern: String, message: String },
}

/// Coarse part-of-speech tag carried by lemma dictionary entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adjective,
    Other,
}

/// A lemma dictionary value: either a bare lemma or a lemma with a POS tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LemmaEntry {
    Plain(String),
    Tagged { lemma: String, pos: PartOfSpeech },
}

impl LemmaEntry {
    pub fn lemma(&self) -> &str {
        match self {
            LemmaEntry::Plain(l) => l,
            LemmaEntry::Tagged { lemma, .. } => lemma,
        }
    }

    pub fn pos(&self) -> Option<PartOfSpeech> {
        match self {
            LemmaEntry::Plain(_) => None,
            LemmaEntry::Tagged { pos, .. } => Some(*pos),
        }
    }
}

fn default_code_patterns() -> Vec<String> {
    vec![DEFAULT_CODE_PATTERN.to_string()]
}

/// On-disk form of [`NormalizationConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawConfig {
    #[serde(default)]
    acronyms: BTreeMap<String, String>,
    #[serde(default)]
    stopwords: BTreeSet<String>,
    #[serde(default)]
    lemmas: BTreeMap<String, LemmaEntry>,
    #[serde(default = "default_code_patterns")]
    code_patterns: Vec<String>,
}

/// Tables driving the normalization pipeline.
///
/// Loaded from JSON with the keys `acronyms`, `stopwords`, `lemmas` and
/// `code_patterns`. Stopwords and acronym keys are folded to lowercase ASCII
/// on load so lookups never depend on how the file was written.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct NormalizationConfig {
    raw: RawConfig,
    acronym_index: HashMap<String, String>,
    stopwords: BTreeSet<String>,
    codes: Vec<Regex>,
    pos_by_lemma: HashMap<String, PartOfSpeech>,
}

impl TryFrom<RawConfig> for NormalizationConfig {
    type Error = TextprepError;

    fn try_from(raw: RawConfig) -> Result<Self, Self::Error> {
        let acronym_index = raw
            .acronyms
            .iter()
            .map(|(k, v)| (acronym_key(k), v.clone()))
            .collect();
        let stopwords = raw
            .stopwords
            .iter()
            .map(|w| fold_ascii(w).trim().to_string())
            .filter(|w| !w.is_empty())
            .collect();
        let codes = raw
            .code_patterns
            .iter()
            .map(|p| {
                Regex::new(&format!("(?i){p}")).map_err(|e| TextprepError::Pattern {
                    pattern: p.clone(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut pos_by_lemma = HashMap::new();
        for entry in raw.lemmas.values() {
            if let Some(pos) = entry.pos() {
                pos_by_lemma.entry(entry.lemma().to_string()).or_insert(pos);
            }
        }
        Ok(Self {
            raw,
            acronym_index,
            stopwords,
            codes,
            pos_by_lemma,
        })
    }
}

impl From<NormalizationConfig> for RawConfig {
    fn from(cfg: NormalizationConfig) -> Self {
        cfg.raw
    }
}

impl PartialEq for NormalizationConfig {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self::shipped()
    }
}

impl NormalizationConfig {
    /// The Spanish tables bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_CONFIG).expect("bundled normalization config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, TextprepError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, TextprepError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextprepError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.raw).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding. Models record it so a
    /// model is never applied under different normalization tables.
    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(&self.raw).expect("config serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Registers (or overrides) an acronym expansion.
    pub fn with_acronym(mut self, key: &str, expansion: &str) -> Self {
        self.raw.acronyms.insert(key.to_string(), expansion.to_string());
        self.acronym_index.insert(acronym_key(key), expansion.to_string());
        self
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }

    pub fn is_code(&self, token: &str) -> bool {
        self.codes.iter().any(|re| re.is_match(token).unwrap_or(false))
    }

    /// POS tag of a lemma, when the dictionary carries one.
    pub fn pos_of(&self, lemma: &str) -> Option<PartOfSpeech> {
        self.pos_by_lemma.get(lemma).copied()
    }

    fn lemma_lookup(&self, surface: &str) -> Option<&str> {
        self.raw.lemmas.get(surface).map(LemmaEntry::lemma)
    }

    pub fn lemma_entries(&self) -> impl Iterator<Item = (&str, &LemmaEntry)> {
        self.raw.lemmas.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Normalized lookup key for an acronym: lowercase, ASCII-folded, without
/// trailing periods. `S.L.`, `s.l` and `S.L` all map to `s.l`.
fn acronym_key(s: &str) -> String {
    fold_ascii(s).trim_end_matches('.').to_string()
}

/// Lowercases and strips combining marks (`Ó` -> `o`, `ñ` -> `n`).
fn fold_ascii(s: &str) -> String {
    s.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// A raw transaction description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDescription(pub String);

impl RawDescription {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for RawDescription {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Lemma sequence produced by [`preprocess`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedDoc {
    pub source_id: String,
    pub lemmas: Vec<String>,
}

impl ProcessedDoc {
    pub fn new(source_id: impl Into<String>, lemmas: Vec<String>) -> Self {
        Self {
            source_id: source_id.into(),
            lemmas,
        }
    }

    pub fn from_tokens(tokens: &[&str]) -> Self {
        Self::new("", tokens.iter().map(|t| t.to_string()).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    /// Distinct lemmas in first-occurrence order.
    pub fn distinct(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.lemmas
            .iter()
            .filter(|l| seen.insert(l.as_str()))
            .map(String::as_str)
            .collect()
    }

    /// Space-joined lemmas; feeding this back through [`preprocess`] yields
    /// the same lemma set.
    pub fn render(&self) -> String {
        self.lemmas.join(" ")
    }
}

impl fmt::Display for ProcessedDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Removes standalone numbers, tokens matching a code pattern, and any digit
/// run left inside the surviving tokens.
pub fn strip_numeric_and_codes(text: &str, cfg: &NormalizationConfig) -> String {
    text.split_whitespace()
        .filter(|tok| !cfg.is_code(tok))
        .map(|tok| tok.chars().filter(|c| !c.is_ascii_digit()).collect::<String>())
        .filter(|tok| tok.chars().any(char::is_alphanumeric))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replaces every acronym-table key found as a whitespace token (ignoring
/// case, trailing periods and surrounding brackets or commas).
pub fn expand_abbreviations(text: &str, cfg: &NormalizationConfig) -> String {
    let keep = |c: char| c.is_alphanumeric() || c == '.';
    text.split_whitespace()
        .map(|chunk| {
            let start = chunk.find(keep);
            let end = chunk.rfind(keep);
            let (Some(start), Some(end)) = (start, end) else {
                return chunk.to_string();
            };
            let end = end + chunk[end..].chars().next().map_or(1, char::len_utf8);
            let core = &chunk[start..end];
            match cfg.acronym_index.get(&acronym_key(core)) {
                Some(expansion) => format!("{}{}{}", &chunk[..start], expansion, &chunk[end..]),
                None => chunk.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Folds diacritics, lowercases, turns every non-alphanumeric character into
/// a space and collapses runs of whitespace.
pub fn strip_symbols_diacritics(text: &str) -> String {
    let folded: String = text
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn remove_stopwords(tokens: Vec<String>, cfg: &NormalizationConfig) -> Vec<String> {
    tokens.into_iter().filter(|t| !cfg.is_stopword(t)).collect()
}

pub fn lemmatize(tokens: Vec<String>, cfg: &NormalizationConfig) -> Vec<String> {
    tokens
        .into_iter()
        .map(|t| match cfg.lemma_lookup(&t) {
            Some(lemma) => lemma.to_string(),
            None => singularize(&t).unwrap_or(t),
        })
        .collect()
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Rule-based Spanish plural stripping.
///
/// * `-Ves` after a vowel + one of `d l n r y` drops `es` (`ciudades`,
///   `trenes`, `hoteles`); `-Vces` becomes `-Vz` (`luces`).
/// * otherwise `-as`, `-es`, `-os` drop the final `s` (`gasolineras`).
///
/// Words of three letters or fewer and words ending in `-is`/`-us` are left
/// alone (`gas`, `autobus`, `pais`).
fn singularize(word: &str) -> Option<String> {
    let b = word.as_bytes();
    let n = b.len();
    if n <= 3 || !word.is_ascii() || b[n - 1] != b's' {
        return None;
    }
    if n >= 5 && b[n - 2] == b'e' && is_vowel(b[n - 4]) {
        match b[n - 3] {
            b'd' | b'l' | b'n' | b'r' | b'y' => return Some(word[..n - 2].to_string()),
            b'c' => return Some(format!("{}z", &word[..n - 3])),
            _ => {}
        }
    }
    if matches!(b[n - 2], b'a' | b'e' | b'o') {
        return Some(word[..n - 1].to_string());
    }
    None
}

/// Full normalization pipeline.
pub fn preprocess(
    source_id: &str,
    raw: &RawDescription,
    cfg: &NormalizationConfig,
) -> ProcessedDoc {
    let expanded = expand_abbreviations(raw.as_str(), cfg);
    let clean = strip_symbols_diacritics(&expanded);
    let stripped = strip_numeric_and_codes(&clean, cfg);
    let tokens: Vec<String> = stripped.split_whitespace().map(str::to_string).collect();
    let tokens = remove_stopwords(tokens, cfg);
    let mut lemmas = lemmatize(tokens, cfg);
    // a dictionary lemma may itself be a stopword (`hacemos` -> `hacer`)
    lemmas.retain(|l| !cfg.is_stopword(l));
    ProcessedDoc::new(source_id, lemmas)
}

/// Convenience wrapper for free text without an id.
pub fn preprocess_text(text: &str, cfg: &NormalizationConfig) -> ProcessedDoc {
    preprocess("", &RawDescription(text.to_string()), cfg)
}
