use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{labels_of, CorpusError, SectorLabel, Transaction, N_SECTORS};

/// One cross-validation split. Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold partition of a labeled corpus.
///
/// Members of each class are shuffled with a seeded stream and dealt round
/// robin, so per-class counts across folds differ by at most one. The deal
/// for each class starts where the previous class stopped, which keeps the
/// overall fold sizes balanced too.
pub fn stratified_folds(
    corpus: &[Transaction],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, CorpusError> {
    let labels = labels_of(corpus)?;
    stratified_folds_by_label(&labels, k, seed)
}

pub fn stratified_folds_by_label(
    labels: &[SectorLabel],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::BadFoldCount(k));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); N_SECTORS];
    for (i, l) in labels.iter().enumerate() {
        members[l.index()].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < k {
            return Err(CorpusError::ClassTooSmall {
                class: SectorLabel::ALL[c],
                count: m.len(),
                k,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut cursor = 0usize;
    for m in members.iter_mut() {
        m.shuffle(&mut rng);
        for &i in m.iter() {
            fold_of[i] = cursor % k;
            cursor += 1;
        }
    }

    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] == f);
            Fold { train, test }
        })
        .collect())
}
