//! Wordgram/biwordgram vocabulary, sparse count vectors and chi-squared
//! percentile selection.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SectorLabel, N_SECTORS};
use crate::scalar::{total_cmp, Real};
use crate::textprep::ProcessedDoc;

pub const DEFAULT_PERCENTILE: u32 = 50;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("percentile must lie in 1..=100, got {0}")]
    Percentile(u32),
    #[error("chi-squared scores have not been computed")]
    NoScores,
    #[error("{samples} samples but {labels} labels")]
    LengthMismatch { samples: usize, labels: usize },
    #[error("no samples to score")]
    NoSamples,
    #[error("expected {expected} scores, got {got}")]
    ScoreCount { expected: usize, got: usize },
}

/// Sparse non-negative feature vector; entries sorted by column, no zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    dim: usize,
    entries: Vec<(usize, T)>,
}

impl<T: Real> FeatureVector<T> {
    /// Builds a vector from unordered `(column, value)` pairs; duplicate
    /// columns are summed and zeros dropped.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, T)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, T)> = Vec::with_capacity(pairs.len());
        for (c, v) in pairs {
            assert!(c < dim, "column {c} out of range for dimension {dim}");
            match entries.last_mut() {
                Some(last) if last.0 == c => last.1 = last.1 + v,
                _ => entries.push((c, v)),
            }
        }
        entries.retain(|e| e.1 != T::zero());
        Self { dim, entries }
    }

    pub fn from_dense(values: &[T]) -> Self {
        let pairs = values.iter().copied().enumerate().filter(|(_, v)| *v != T::zero()).collect();
        Self::from_pairs(values.len(), pairs)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn get(&self, col: usize) -> T {
        match self.entries.binary_search_by_key(&col, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => T::zero(),
        }
    }

    pub fn dot(&self, dense: &[T]) -> T {
        self.entries.iter().fold(T::zero(), |acc, &(c, v)| acc + dense[c] * v)
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for &(c, v) in &self.entries {
            out[c] = v;
        }
        out
    }

    pub fn scaled(&self, factor: T) -> Self {
        let pairs = self.entries.iter().map(|&(c, v)| (c, v * factor)).collect();
        Self::from_pairs(self.dim, pairs)
    }

    pub fn sum(&self) -> T {
        self.entries.iter().map(|e| e.1).sum()
    }
}

impl<T: Real> std::ops::Add for &FeatureVector<T> {
    type Output = FeatureVector<T>;

    fn add(self, rhs: Self) -> FeatureVector<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let pairs = self.entries.iter().chain(&rhs.entries).copied().collect();
        FeatureVector::from_pairs(self.dim, pairs)
    }
}

/// Unigrams followed by adjacent bigrams (joined by one space).
pub fn doc_terms(lemmas: &[String]) -> impl Iterator<Item = String> + '_ {
    lemmas
        .iter()
        .cloned()
        .chain(lemmas.windows(2).map(|w| format!("{} {}", w[0], w[1])))
}

/// Vocabulary over wordgrams and biwordgrams plus optional chi-squared
/// selection state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawSpace<T>", into = "RawSpace<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct FeatureSpace<T: Real> {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    chi2: Option<Vec<T>>,
    selected: Option<Vec<usize>>,
    column_of: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace<T> {
    terms: Vec<String>,
    chi2: Option<Vec<T>>,
    selected: Option<Vec<usize>>,
}

impl<T: Real> From<RawSpace<T>> for FeatureSpace<T> {
    fn from(raw: RawSpace<T>) -> Self {
        FeatureSpace::from_parts(raw.terms, raw.chi2, raw.selected)
    }
}

impl<T: Real> From<FeatureSpace<T>> for RawSpace<T> {
    fn from(s: FeatureSpace<T>) -> Self {
        RawSpace {
            terms: s.terms,
            chi2: s.chi2,
            selected: s.selected,
        }
    }
}

impl<T: Real> FeatureSpace<T> {
    /// Reassembles a space from its persisted parts. `terms` must be sorted
    /// and unique; `selected` sorted ascending.
    pub fn from_parts(terms: Vec<String>, chi2: Option<Vec<T>>, selected: Option<Vec<usize>>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let mut space = Self {
            terms,
            index,
            chi2,
            selected: None,
            column_of: Vec::new(),
        };
        space.set_selection(selected);
        space
    }

    fn set_selection(&mut self, selected: Option<Vec<usize>>) {
        self.column_of = match &selected {
            None => (0..self.terms.len()).map(Some).collect(),
            Some(cols) => {
                let mut m = vec![None; self.terms.len()];
                for (pos, &c) in cols.iter().enumerate() {
                    m[c] = Some(pos);
                }
                m
            }
        };
        self.selected = selected;
    }

    /// Number of vocabulary terms (before selection).
    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    /// Dimension of vectors produced by [`transform_counts`].
    pub fn dim(&self) -> usize {
        self.selected.as_ref().map_or(self.terms.len(), Vec::len)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn chi2(&self) -> Option<&[T]> {
        self.chi2.as_deref()
    }

    pub fn selected(&self) -> Option<&[usize]> {
        self.selected.as_deref()
    }

    pub fn selected_mask(&self) -> Vec<bool> {
        self.column_of.iter().map(Option::is_some).collect()
    }

    /// Term behind an output column.
    pub fn column_term(&self, col: usize) -> &str {
        match &self.selected {
            Some(cols) => &self.terms[cols[col]],
            None => &self.terms[col],
        }
    }

    /// The same vocabulary with selection cleared.
    pub fn unselected(&self) -> Self {
        Self::from_parts(self.terms.clone(), self.chi2.clone(), None)
    }

    pub fn with_scores(mut self, scores: Vec<T>) -> Result<Self, FeatureError> {
        if scores.len() != self.terms.len() {
            return Err(FeatureError::ScoreCount {
                expected: self.terms.len(),
                got: scores.len(),
            });
        }
        self.chi2 = Some(scores);
        Ok(self)
    }
}

/// All distinct unigrams and adjacent bigrams, ordered lexicographically.
pub fn fit_vocabulary<T: Real>(docs: &[ProcessedDoc]) -> Result<FeatureSpace<T>, FeatureError> {
    let terms: BTreeSet<String> = docs.iter().flat_map(|d| doc_terms(&d.lemmas)).collect();
    if terms.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    Ok(FeatureSpace::from_parts(terms.into_iter().collect(), None, None))
}

/// Term counts of `doc`, restricted to the selected columns when selection
/// has been applied. Out-of-vocabulary terms are ignored.
pub fn transform_counts<T: Real>(doc: &ProcessedDoc, space: &FeatureSpace<T>) -> FeatureVector<T> {
    transform_lemmas(&doc.lemmas, space)
}

pub fn transform_lemmas<T: Real>(lemmas: &[String], space: &FeatureSpace<T>) -> FeatureVector<T> {
    let pairs = doc_terms(lemmas)
        .filter_map(|t| space.index.get(&t).and_then(|&i| space.column_of[i]))
        .map(|c| (c, T::one()))
        .collect();
    FeatureVector::from_pairs(space.dim(), pairs)
}

/// Count-weighted chi-squared statistic of each column against the class.
///
/// `O[f][c]` is the total count of `f` in class-`c` samples and
/// `E[f][c] = total(f) * share(c)`, where `share(c)` is class `c`'s fraction
/// of all feature counts. Columns with zero total score 0.
pub fn chi2_scores<T: Real>(
    samples: &[FeatureVector<T>],
    labels: &[SectorLabel],
) -> Result<Vec<T>, FeatureError> {
    if samples.len() != labels.len() {
        return Err(FeatureError::LengthMismatch {
            samples: samples.len(),
            labels: labels.len(),
        });
    }
    let Some(first) = samples.first() else {
        return Err(FeatureError::NoSamples);
    };
    let dim = first.dim();
    let mut observed = vec![[T::zero(); N_SECTORS]; dim];
    let mut class_total = [T::zero(); N_SECTORS];
    for (x, y) in samples.iter().zip(labels) {
        for &(c, v) in x.entries() {
            observed[c][y.index()] = observed[c][y.index()] + v;
            class_total[y.index()] = class_total[y.index()] + v;
        }
    }
    let grand: T = class_total.iter().copied().sum();
    if grand == T::zero() {
        return Ok(vec![T::zero(); dim]);
    }
    Ok(observed
        .iter()
        .map(|row| {
            let total: T = row.iter().copied().sum();
            if total == T::zero() {
                return T::zero();
            }
            row.iter()
                .zip(&class_total)
                .filter(|(_, &ct)| ct > T::zero())
                .map(|(&o, &ct)| {
                    let e = total * ct / grand;
                    (o - e) * (o - e) / e
                })
                .sum()
        })
        .collect())
}

/// Keeps the top `ceil(percentile / 100 * V)` columns by chi-squared score;
/// ties go to the lower column index.
pub fn select_percentile<T: Real>(
    space: &FeatureSpace<T>,
    percentile: u32,
) -> Result<FeatureSpace<T>, FeatureError> {
    if percentile == 0 || percentile > 100 {
        return Err(FeatureError::Percentile(percentile));
    }
    let scores = space.chi2.as_ref().ok_or(FeatureError::NoScores)?;
    let v = space.terms.len();
    let keep = (percentile as usize * v).div_ceil(100);
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_by(|&a, &b| total_cmp(scores[b], scores[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
    chosen.sort_unstable();
    Ok(FeatureSpace::from_parts(
        space.terms.clone(),
        space.chi2.clone(),
        Some(chosen),
    ))
}

/// Fits the vocabulary, scores it against `labels` and applies percentile
/// selection in one go.
pub fn fit_selected<T: Real>(
    docs: &[ProcessedDoc],
    labels: &[SectorLabel],
    percentile: u32,
) -> Result<FeatureSpace<T>, FeatureError> {
    let space = fit_vocabulary::<T>(docs)?;
    let full: Vec<FeatureVector<T>> = docs.iter().map(|d| transform_counts(d, &space)).collect();
    let scores = chi2_scores(&full, labels)?;
    select_percentile(&space.with_scores(scores)?, percentile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(t: &[&str]) -> ProcessedDoc {
        ProcessedDoc::from_tokens(t)
    }

    #[test]
    fn vocabulary_examples() {
        let s = fit_vocabulary::<f64>(&[doc(&["recibo", "agua"])]).unwrap();
        assert_eq!(s.terms(), ["agua", "recibo", "recibo agua"]);
        let s = fit_vocabulary::<f64>(&[doc(&["a"]), doc(&["a"])]).unwrap();
        assert_eq!(s.terms(), ["a"]);
        let s = fit_vocabulary::<f64>(&[doc(&["a", "b"]), doc(&["c", "d", "e"])]).unwrap();
        assert_eq!(s.vocabulary_size(), 3 + 5);
        assert_eq!(
            fit_vocabulary::<f64>(&[doc(&[]), doc(&[])]).unwrap_err(),
            FeatureError::EmptyVocabulary
        );
        assert_eq!(fit_vocabulary::<f64>(&[]).unwrap_err(), FeatureError::EmptyVocabulary);
    }

    #[test]
    fn transform_examples() {
        let s = fit_vocabulary::<f64>(&[doc(&["recibo", "agua"])]).unwrap();
        assert_eq!(transform_counts(&doc(&["recibo", "agua"]), &s).to_dense(), [1.0, 1.0, 1.0]);
        assert_eq!(transform_counts(&doc(&["luz"]), &s).nnz(), 0);
        assert_eq!(transform_counts(&doc(&["agua", "agua"]), &s).to_dense(), [2.0, 0.0, 0.0]);
    }

    fn vecs(rows: &[&[f64]]) -> Vec<FeatureVector<f64>> {
        rows.iter().map(|r| FeatureVector::from_dense(r)).collect()
    }

    #[test]
    fn chi2_examples() {
        use SectorLabel::{Flights as B, GasStations as A};
        // column 0 only in A ([4, 0]), column 1 uniform ([2, 2]), column 2
        // balances B, column 3 empty
        let x = vecs(&[
            &[2.0, 1.0, 0.0, 0.0],
            &[2.0, 1.0, 0.0, 0.0],
            &[0.0, 1.0, 2.0, 0.0],
            &[0.0, 1.0, 2.0, 0.0],
        ]);
        let s = chi2_scores(&x, &[A, A, B, B]).unwrap();
        assert!(s[0] > s[1]);
        assert_eq!(s[1], 0.0);
        assert_eq!(s[3], 0.0);

        // O = [3, 1], class shares 1/2 each -> E = [2, 2], score 1.0
        let x = vecs(&[&[3.0, 0.0], &[1.0, 2.0]]);
        let s = chi2_scores(&x, &[A, B]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12, "{}", s[0]);
    }

    #[test]
    fn chi2_errors() {
        assert_eq!(
            chi2_scores::<f64>(&[], &[SectorLabel::Flights]).unwrap_err(),
            FeatureError::LengthMismatch { samples: 0, labels: 1 }
        );
        assert_eq!(chi2_scores::<f64>(&[], &[]).unwrap_err(), FeatureError::NoSamples);
    }

    fn scored(scores: &[f64]) -> FeatureSpace<f64> {
        let terms = (0..scores.len()).map(|i| format!("t{i:02}")).collect();
        FeatureSpace::from_parts(terms, Some(scores.to_vec()), None)
    }

    #[test]
    fn selection_examples() {
        let s = scored(&[5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 0.5]);
        assert_eq!(select_percentile(&s, 100).unwrap().dim(), 10);
        let half = select_percentile(&s, 50).unwrap();
        assert_eq!(half.selected().unwrap(), [0, 2, 4, 6, 8]);
        let tie = scored(&[1.0, 3.0, 3.0, 0.0]);
        assert_eq!(select_percentile(&tie, 25).unwrap().selected().unwrap(), [1]);
        assert_eq!(select_percentile(&s, 0).unwrap_err(), FeatureError::Percentile(0));
        assert_eq!(select_percentile(&s, 101).unwrap_err(), FeatureError::Percentile(101));
        let unscored = FeatureSpace::<f64>::from_parts(vec!["a".into()], None, None);
        assert_eq!(select_percentile(&unscored, 50).unwrap_err(), FeatureError::NoScores);
    }

    #[test]
    fn selected_transform_masks_columns() {
        let s = fit_vocabulary::<f64>(&[doc(&["recibo", "agua"])]).unwrap();
        let s = s.with_scores(vec![3.0, 1.0, 2.0]).unwrap();
        let sel = select_percentile(&s, 66).unwrap();
        assert_eq!(sel.selected_mask(), [true, false, true]);
        let v = transform_counts(&doc(&["recibo", "agua"]), &sel);
        assert_eq!(v.dim(), 2);
        assert_eq!(sel.column_term(1), "recibo agua");
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let s = fit_vocabulary::<f32>(&[doc(&["recibo", "agua"])]).unwrap();
        let s = select_percentile(&s.with_scores(vec![1.0, 2.0, 3.0]).unwrap(), 50).unwrap();
        let back: FeatureSpace<f32> = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.index_of("recibo"), Some(1));
    }

    proptest! {
        #[test]
        fn unigram_counts_are_additive(
            a in proptest::collection::vec("[a-d]", 0..6),
            b in proptest::collection::vec("[a-d]", 0..6),
        ) {
            let all = ["a", "b", "c", "d"];
            let space = fit_vocabulary::<f64>(&[doc(&all)]).unwrap();
            let da = ProcessedDoc::new("", a.clone());
            let db = ProcessedDoc::new("", b.clone());
            let joined = ProcessedDoc::new("", a.iter().chain(&b).cloned().collect());
            let sum = &transform_counts(&da, &space) + &transform_counts(&db, &space);
            let whole = transform_counts(&joined, &space);
            for t in all {
                let c = space.index_of(t).unwrap();
                prop_assert_eq!(whole.get(c), sum.get(c));
            }
            // bigram columns gain at most the one boundary term
            prop_assert!(whole.sum() - sum.sum() <= 1.0);
        }

        #[test]
        fn selection_shrinks_and_is_idempotent(
            scores in proptest::collection::vec(0.0f64..10.0, 1..30),
            p in 1u32..=100,
        ) {
            let s = scored(&scores);
            let once = select_percentile(&s, p).unwrap();
            prop_assert!(once.dim() <= s.dim());
            prop_assert_eq!(once.dim(), (p as usize * scores.len()).div_ceil(100));
            let twice = select_percentile(&once, p).unwrap();
            prop_assert_eq!(once.selected(), twice.selected());
        }
    }
}
