use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::corpus::fuzzy_ratio;

/// Edit similarity at or above which two different lemmas still count as a
/// (partial) match under the proximity metric.
pub const PROXIMITY_THRESHOLD: f64 = 0.8;

/// `|A ∩ B| / |A ∪ B|`, and 0 when both sets are empty.
pub fn jaccard_similarity<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let a: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

fn term_similarity(a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    let s = fuzzy_ratio(a, b);
    if s >= PROXIMITY_THRESHOLD {
        s
    } else {
        0.0
    }
}

/// Mean over `a` of the best lexical match in `b`: exact lemma 1, else edit
/// similarity when it reaches [`PROXIMITY_THRESHOLD`], else 0.
pub fn proximity_similarity<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64, ExplainError> {
    if a.is_empty() {
        return Err(ExplainError::EmptyTerms);
    }
    let total: f64 = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| term_similarity(x.as_ref(), y.as_ref()))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / a.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Jaccard,
    #[default]
    Proximity,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Jaccard => "jaccard",
            Self::Proximity => "proximity",
        }
    }

    /// Similarity of an explanation's terms to a sector bag; an empty term
    /// list scores 0 under both metrics.
    pub fn score<S: AsRef<str>>(self, terms: &[S], bag: &[S]) -> f64 {
        match self {
            Self::Jaccard => jaccard_similarity(terms, bag),
            Self::Proximity => proximity_similarity(terms, bag).unwrap_or(0.0),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jaccard" => Ok(Self::Jaccard),
            "proximity" => Ok(Self::Proximity),
            other => Err(ExplainError::UnknownMetric(other.to_string())),
        }
    }
}
