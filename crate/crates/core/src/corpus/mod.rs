//! Transactions, the sector label schema, corpus preparation and evaluation.

mod dedup;
mod folds;
mod label;
mod metrics;
pub mod synthetic;

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::RawDescription;

pub use dedup::{deduplicate, fuzzy_ratio, levenshtein, DEFAULT_DEDUP_THRESHOLD};
pub use folds::{stratified_folds, stratified_folds_by_label, Fold};
pub use label::{SectorLabel, UnknownSector, N_SECTORS};
pub use metrics::{score_predictions, Confusion, EvalReport, FoldScores};
pub use synthetic::generate_synthetic_corpus;

pub const CSV_HEADER: [&str; 5] = ["id", "description", "amount_eur", "date", "label"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}, expected id,description,amount_eur,date,label")]
    Header { found: Vec<String> },
    #[error("malformed row, line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("negative amount, line {line}")]
    NegativeAmount { line: u64 },
    #[error("unknown sector, line {line}: {value:?}")]
    UnknownSector { line: u64, value: String },
    #[error("duplicate id {id:?}, line {line}")]
    DuplicateId { line: u64, id: String },
    #[error("transaction {id:?} has no label")]
    Unlabeled { id: String },
    #[error("class {class} has {count} members, fewer than {k} folds")]
    ClassTooSmall {
        class: SectorLabel,
        count: usize,
        k: usize,
    },
    #[error("fold count must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("gold and predicted label lists differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("cannot score an empty prediction list")]
    EmptyPredictions,
}

/// One bank transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: String,
    pub description: RawDescription,
    pub amount_eur: f64,
    pub date: Option<NaiveDate>,
    pub label: Option<SectorLabel>,
}

impl Transaction {
    pub fn new(id: impl Into<String>, description: &str, amount_eur: f64) -> Self {
        Self {
            id: id.into(),
            description: RawDescription(description.to_string()),
            amount_eur,
            date: None,
            label: None,
        }
    }

    pub fn with_label(mut self, label: SectorLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_date(mut self, date: NaiveDate) -> Self {
        self.date = Some(date);
        self
    }
}

/// Labels of a fully labeled corpus.
pub fn labels_of(corpus: &[Transaction]) -> Result<Vec<SectorLabel>, CorpusError> {
    corpus
        .iter()
        .map(|t| t.label.ok_or_else(|| CorpusError::Unlabeled { id: t.id.clone() }))
        .collect()
}

pub fn load_transactions(path: &Path) -> Result<Vec<Transaction>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_transactions(file)
}

/// Parses the corpus CSV. Line numbers in errors are 1-based file lines.
pub fn read_transactions<R: Read>(reader: R) -> Result<Vec<Transaction>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != CSV_HEADER {
        return Err(CorpusError::Header { found: header });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CorpusError::Malformed {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| CorpusError::Malformed { line, message };

        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(malformed("empty id".into()));
        }
        let amount: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad amount {:?}", &record[2])))?;
        if !amount.is_finite() {
            return Err(malformed(format!("bad amount {:?}", &record[2])));
        }
        if amount < 0.0 {
            return Err(CorpusError::NegativeAmount { line });
        }
        let date = match record[3].trim() {
            "" => None,
            s => Some(
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map_err(|_| malformed(format!("bad date {s:?}")))?,
            ),
        };
        let label = match record[4].trim() {
            "" => None,
            s => Some(s.parse::<SectorLabel>().map_err(|_| CorpusError::UnknownSector {
                line,
                value: s.to_string(),
            })?),
        };
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line, id });
        }
        out.push(Transaction {
            id,
            description: RawDescription(record[1].to_string()),
            amount_eur: amount,
            date,
            label,
        });
    }
    Ok(out)
}

pub fn write_transactions<W: Write>(writer: W, corpus: &[Transaction]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for t in corpus {
        let date = t.date.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default();
        let label = t.label.map(SectorLabel::as_str).unwrap_or("");
        w.write_record([
            t.id.as_str(),
            t.description.as_str(),
            &format!("{}", t.amount_eur),
            &date,
            label,
        ])?;
    }
    w.flush().map_err(|e| CorpusError::Csv(e.into()))?;
    Ok(())
}
