//! Linear SVC (Crammer–Singer) and Random Forest over sparse count vectors.

mod forest;
mod model_file;
mod svc;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SectorLabel, N_SECTORS};
use crate::features::{transform_counts, FeatureSpace, FeatureVector};
use crate::scalar::{argmax, Real};
use crate::textprep::ProcessedDoc;

pub use forest::{train_random_forest, Forest, RfParams, Tree, TreeNode};
pub use model_file::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use svc::{svc_objective, train_linear_svc, LinearSvc, SvcFit, SvcParams};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training data has a single class")]
    SingleClass,
    #[error("no training samples")]
    Empty,
    #[error("{samples} samples but {labels} labels")]
    LengthMismatch { samples: usize, labels: usize },
    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("model trained under different normalization config")]
    ConfigMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svc,
    Rf,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Svc => "svc",
            Self::Rf => "rf",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svc" => Ok(Self::Svc),
            "rf" => Ok(Self::Rf),
            other => Err(ClassifyError::InvalidParam(format!("unknown classifier {other:?}"))),
        }
    }
}

/// Hyperparameters for either learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierParams {
    Svc(SvcParams),
    Rf(RfParams),
}

impl ClassifierParams {
    pub fn default_for(kind: ClassifierKind, seed: u64) -> Self {
        match kind {
            ClassifierKind::Svc => Self::Svc(SvcParams {
                seed,
                ..SvcParams::default()
            }),
            ClassifierKind::Rf => Self::Rf(RfParams {
                seed,
                ..RfParams::default()
            }),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Svc(_) => ClassifierKind::Svc,
            Self::Rf(_) => ClassifierKind::Rf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model<T: Real> {
    Svc(LinearSvc<T>),
    Rf(Forest<T>),
}

/// A fitted classifier together with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier<T: Real> {
    space: FeatureSpace<T>,
    config_hash: [u8; 32],
    model: Model<T>,
    /// Wall-clock training time. Not persisted, so model files stay
    /// byte-identical across runs.
    pub train_seconds: f64,
}

/// `w_c = N / (K · N_c)` for each class present; absent classes get 0.
pub fn compute_class_weights<T: Real>(y: &[SectorLabel]) -> [T; N_SECTORS] {
    let mut counts = [0usize; N_SECTORS];
    for l in y {
        counts[l.index()] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let mut w = [T::zero(); N_SECTORS];
    for (wc, &nc) in w.iter_mut().zip(&counts) {
        if nc > 0 {
            *wc = T::of_usize(y.len()) / (T::of_usize(present) * T::of_usize(nc));
        }
    }
    w
}

pub(crate) fn check_training_set<T: Real>(
    x: &[FeatureVector<T>],
    y: &[SectorLabel],
) -> Result<usize, ClassifyError> {
    if x.len() != y.len() {
        return Err(ClassifyError::LengthMismatch {
            samples: x.len(),
            labels: y.len(),
        });
    }
    let Some(first) = x.first() else {
        return Err(ClassifyError::Empty);
    };
    let dim = first.dim();
    if let Some(bad) = x.iter().find(|v| v.dim() != dim) {
        return Err(ClassifyError::DimensionMismatch {
            expected: dim,
            got: bad.dim(),
        });
    }
    if y.iter().all(|l| *l == y[0]) {
        return Err(ClassifyError::SingleClass);
    }
    Ok(dim)
}

impl<T: Real> TrainedClassifier<T> {
    pub fn from_parts(space: FeatureSpace<T>, config_hash: [u8; 32], model: Model<T>) -> Self {
        Self {
            space,
            config_hash,
            model,
            train_seconds: 0.0,
        }
    }

    /// Vectorizes `docs` against `space` and trains the requested learner.
    pub fn train(
        space: FeatureSpace<T>,
        config_hash: [u8; 32],
        docs: &[ProcessedDoc],
        y: &[SectorLabel],
        params: &ClassifierParams,
    ) -> Result<Self, ClassifyError> {
        let x: Vec<FeatureVector<T>> = docs.iter().map(|d| transform_counts(d, &space)).collect();
        let start = Instant::now();
        let model = match params {
            ClassifierParams::Svc(p) => Model::Svc(train_linear_svc(&x, y, p)?.model),
            ClassifierParams::Rf(p) => Model::Rf(train_random_forest(&x, y, p)?),
        };
        let mut m = Self::from_parts(space, config_hash, model);
        m.train_seconds = start.elapsed().as_secs_f64();
        Ok(m)
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            Model::Svc(_) => ClassifierKind::Svc,
            Model::Rf(_) => ClassifierKind::Rf,
        }
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    pub fn feature_space(&self) -> &FeatureSpace<T> {
        &self.space
    }

    pub fn config_hash(&self) -> &[u8; 32] {
        &self.config_hash
    }

    pub fn classes(&self) -> [SectorLabel; N_SECTORS] {
        SectorLabel::ALL
    }

    pub fn vectorize(&self, doc: &ProcessedDoc) -> FeatureVector<T> {
        transform_counts(doc, &self.space)
    }

    /// SVC: `w_c · x + b_c`; RF: vote fraction per class.
    pub fn decision_scores(&self, x: &FeatureVector<T>) -> Result<[T; N_SECTORS], ClassifyError> {
        if x.dim() != self.space.dim() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.space.dim(),
                got: x.dim(),
            });
        }
        Ok(match &self.model {
            Model::Svc(m) => m.scores(x),
            Model::Rf(m) => m.vote_fractions(x),
        })
    }

    pub fn predict(&self, x: &FeatureVector<T>) -> Result<SectorLabel, ClassifyError> {
        let s = self.decision_scores(x)?;
        Ok(SectorLabel::ALL[argmax(&s)])
    }

    pub fn predict_batch(&self, xs: &[FeatureVector<T>]) -> Result<Vec<SectorLabel>, ClassifyError> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn predict_doc(&self, doc: &ProcessedDoc) -> SectorLabel {
        self.predict(&self.vectorize(doc)).expect("vectorize matches the model dimension")
    }
}
