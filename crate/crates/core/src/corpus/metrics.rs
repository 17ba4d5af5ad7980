use serde::{Deserialize, Serialize};

use super::{CorpusError, SectorLabel, N_SECTORS};

/// 8x8 count matrix, rows = gold (or predicted, see callers), columns = the
/// compared label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Confusion(pub [[u64; N_SECTORS]; N_SECTORS]);

impl Confusion {
    pub fn add(&mut self, row: SectorLabel, col: SectorLabel) {
        self.0[row.index()][col.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N_SECTORS).map(|i| self.0[i][i]).sum()
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.0[row].iter().sum()
    }

    pub fn col_sum(&self, col: usize) -> u64 {
        self.0.iter().map(|r| r[col]).sum()
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (r, o) in self.0.iter_mut().zip(other.0.iter()) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
    }
}

/// Scores for one evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Rows are gold labels, columns predictions.
    pub confusion: Confusion,
    #[serde(default)]
    pub training_time_s: f64,
}

/// Accuracy plus macro precision/recall over all eight classes.
///
/// A class with no predicted (precision) or no gold (recall) instances
/// contributes 0 to the macro average.
pub fn score_predictions(
    gold: &[SectorLabel],
    pred: &[SectorLabel],
) -> Result<FoldScores, CorpusError> {
    if gold.len() != pred.len() {
        return Err(CorpusError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(CorpusError::EmptyPredictions);
    }
    let mut confusion = Confusion::default();
    for (&g, &p) in gold.iter().zip(pred) {
        confusion.add(g, p);
    }
    let mut precision = 0.0;
    let mut recall = 0.0;
    for c in 0..N_SECTORS {
        let tp = confusion.0[c][c] as f64;
        let predicted = confusion.col_sum(c);
        let actual = confusion.row_sum(c);
        if predicted > 0 {
            precision += tp / predicted as f64;
        }
        if actual > 0 {
            recall += tp / actual as f64;
        }
    }
    Ok(FoldScores {
        accuracy: confusion.trace() as f64 / confusion.total() as f64,
        macro_precision: precision / N_SECTORS as f64,
        macro_recall: recall / N_SECTORS as f64,
        confusion,
        training_time_s: 0.0,
    })
}

/// Cross-validation summary. Aggregate metrics are the means over folds and
/// `confusion` is the sum of the fold matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: String,
    pub seed: u64,
    pub config_hash: String,
    pub folds: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Mean wall-clock seconds to train one fold model.
    pub training_time_s: f64,
    pub per_fold: Vec<FoldScores>,
    pub confusion: Confusion,
}

impl EvalReport {
    pub fn from_folds(
        classifier: &str,
        seed: u64,
        config_hash: &str,
        per_fold: Vec<FoldScores>,
    ) -> Self {
        let n = per_fold.len().max(1) as f64;
        let mean = |f: fn(&FoldScores) -> f64| per_fold.iter().map(f).sum::<f64>() / n;
        let mut confusion = Confusion::default();
        for f in &per_fold {
            confusion.merge(&f.confusion);
        }
        Self {
            classifier: classifier.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            folds: per_fold.len(),
            accuracy: mean(|f| f.accuracy),
            macro_precision: mean(|f| f.macro_precision),
            macro_recall: mean(|f| f.macro_recall),
            training_time_s: mean(|f| f.training_time_s),
            per_fold,
            confusion,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect() {
        let gold = SectorLabel::ALL.to_vec();
        let s = score_predictions(&gold, &gold).unwrap();
        assert_eq!((s.accuracy, s.macro_precision, s.macro_recall), (1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictor() {
        let gold = SectorLabel::ALL.to_vec();
        let pred = vec![SectorLabel::GasStations; 8];
        let s = score_predictions(&gold, &pred).unwrap();
        assert_eq!(s.accuracy, 0.125);
        assert_eq!(s.macro_recall, 0.125);
        assert_eq!(s.macro_precision, 0.015625);
    }

    #[test]
    fn single_pair_and_errors() {
        let s = score_predictions(&[SectorLabel::Flights], &[SectorLabel::Flights]).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert!(score_predictions(&[SectorLabel::Flights], &[]).is_err());
        assert!(matches!(score_predictions(&[], &[]), Err(CorpusError::EmptyPredictions)));
    }

    #[test]
    fn report_json_keys() {
        let gold = SectorLabel::ALL.to_vec();
        let f = score_predictions(&gold, &gold).unwrap();
        let r = EvalReport::from_folds("svc", 7, "abc", vec![f.clone(), f]);
        let v = serde_json::to_value(&r).unwrap();
        for k in ["accuracy", "macro_precision", "macro_recall", "per_fold", "confusion"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(r.confusion.total(), 16);
    }

    proptest! {
        #[test]
        fn accuracy_is_trace_over_total(pairs in proptest::collection::vec((0usize..8, 0usize..8), 1..100)) {
            let gold: Vec<_> = pairs.iter().map(|p| SectorLabel::ALL[p.0]).collect();
            let pred: Vec<_> = pairs.iter().map(|p| SectorLabel::ALL[p.1]).collect();
            let s = score_predictions(&gold, &pred).unwrap();
            prop_assert_eq!(s.accuracy, s.confusion.trace() as f64 / s.confusion.total() as f64);
            for c in 0..N_SECTORS {
                let n = gold.iter().filter(|g| g.index() == c).count() as u64;
                prop_assert_eq!(s.confusion.row_sum(c), n);
            }
            for v in [s.accuracy, s.macro_precision, s.macro_recall] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
