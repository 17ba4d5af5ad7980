use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, compute_class_weights, ClassifyError};
use crate::corpus::{SectorLabel, N_SECTORS};
use crate::features::FeatureVector;
use crate::scalar::Real;

/// Hinge loss, Crammer–Singer multiclass, L2 penalty. Only the tunable knobs
/// are fields; the loss family is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvcParams {
    pub c: f64,
    /// Epoch cap.
    pub max_iter: usize,
    pub tol: f64,
    pub balanced: bool,
    pub seed: u64,
}

impl Default for SvcParams {
    fn default() -> Self {
        Self {
            c: 0.1,
            max_iter: 100,
            tol: 1e-10,
            balanced: true,
            seed: 0,
        }
    }
}

impl SvcParams {
    fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ClassifyError::InvalidParam(format!("C must be positive, got {}", self.c)));
        }
        if self.max_iter == 0 {
            return Err(ClassifyError::InvalidParam("max_iter must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(ClassifyError::InvalidParam(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// One weight row and bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvc<T> {
    dim: usize,
    weights: Vec<T>,
    bias: [T; N_SECTORS],
    pub params: SvcParams,
}

impl<T: Real> LinearSvc<T> {
    pub fn zeros(dim: usize, params: SvcParams) -> Self {
        Self {
            dim,
            weights: vec![T::zero(); dim * N_SECTORS],
            bias: [T::zero(); N_SECTORS],
            params,
        }
    }

    pub fn from_parts(dim: usize, weights: Vec<T>, bias: [T; N_SECTORS], params: SvcParams) -> Self {
        assert_eq!(weights.len(), dim * N_SECTORS, "weight matrix must be 8 x dim");
        Self {
            dim,
            weights,
            bias,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, class: usize) -> &[T] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    /// Row-major `8 x dim` weight matrix.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T; N_SECTORS] {
        &self.bias
    }

    pub fn scores(&self, x: &FeatureVector<T>) -> [T; N_SECTORS] {
        let mut s = self.bias;
        for (c, sc) in s.iter_mut().enumerate() {
            *sc = *sc + x.dot(self.row(c));
        }
        s
    }
}

/// Outcome of training, with the full-batch objective after every accepted
/// epoch (index 0 is the all-zero starting point).
#[derive(Debug, Clone)]
pub struct SvcFit<T> {
    pub model: LinearSvc<T>,
    pub objective: Vec<T>,
    pub epochs: usize,
    pub rejected_epochs: usize,
}

fn sample_weights<T: Real>(y: &[SectorLabel], balanced: bool) -> [T; N_SECTORS] {
    if balanced {
        compute_class_weights(y)
    } else {
        [T::one(); N_SECTORS]
    }
}

/// Runner-up class (ties to the lower index) and its margin violation
/// `1 + s_c - s_y`.
fn violation<T: Real>(scores: &[T; N_SECTORS], y: usize) -> (usize, T) {
    let mut best = usize::MAX;
    for c in 0..N_SECTORS {
        if c != y && (best == usize::MAX || scores[c] > scores[best]) {
            best = c;
        }
    }
    (best, T::one() + scores[best] - scores[y])
}

/// `(λ/2)(‖W‖² + ‖b‖²) + (1/N) Σ w_{y_i} · max(0, 1 + max_{c≠y_i} s_c − s_{y_i})`
/// with `λ = 1/(C·N)`.
pub fn svc_objective<T: Real>(model: &LinearSvc<T>, x: &[FeatureVector<T>], y: &[SectorLabel]) -> T {
    let n = T::of_usize(x.len());
    let lambda = T::one() / (T::of(model.params.c) * n);
    let cw = sample_weights::<T>(y, model.params.balanced);
    let norm: T = model
        .weights
        .iter()
        .chain(&model.bias)
        .map(|&w| w * w)
        .sum();
    let loss: T = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let (_, v) = violation(&model.scores(xi), yi.index());
            cw[yi.index()] * v.max(T::zero())
        })
        .sum();
    lambda / T::of(2.0) * norm + loss / n
}

/// Seeded epoch subgradient descent with step `1/(λt)`.
///
/// Weights are kept as `scale · V` so the L2 shrink is O(1) per step. After
/// each epoch the full-batch objective is evaluated; an epoch that raises it
/// is rolled back, so the accepted objective sequence never increases.
/// Training stops after `max_iter` epochs or once an accepted epoch improves
/// the objective by less than `tol`.
pub fn train_linear_svc<T: Real>(
    x: &[FeatureVector<T>],
    y: &[SectorLabel],
    params: &SvcParams,
) -> Result<SvcFit<T>, ClassifyError> {
    params.validate()?;
    let dim = check_training_set(x, y)?;
    let n = x.len();
    let lambda = T::one() / (T::of(params.c) * T::of_usize(n));
    let cw = sample_weights::<T>(y, params.balanced);
    let renorm_below = T::epsilon().sqrt();

    let mut best = LinearSvc::zeros(dim, params.clone());
    let mut objective = vec![svc_objective(&best, x, y)];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    let mut epochs = 0;
    let mut rejected = 0;

    let mut v = best.weights.clone();
    let mut vb = best.bias;
    for _ in 0..params.max_iter {
        epochs += 1;
        let mut scale = T::one();
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = T::one() / (lambda * T::of_usize(t));
            let yi = y[i].index();
            let mut scores = [T::zero(); N_SECTORS];
            for (c, s) in scores.iter_mut().enumerate() {
                *s = scale * (vb[c] + x[i].dot(&v[c * dim..(c + 1) * dim]));
            }
            let (rival, viol) = violation(&scores, yi);

            scale = scale * (T::one() - eta * lambda);
            if scale == T::zero() {
                v.iter_mut().for_each(|w| *w = T::zero());
                vb = [T::zero(); N_SECTORS];
                scale = T::one();
            }
            if viol > T::zero() {
                let g = eta * cw[yi] / scale;
                for &(j, xj) in x[i].entries() {
                    v[yi * dim + j] = v[yi * dim + j] + g * xj;
                    v[rival * dim + j] = v[rival * dim + j] - g * xj;
                }
                vb[yi] = vb[yi] + g;
                vb[rival] = vb[rival] - g;
            }
            if scale < renorm_below {
                v.iter_mut().for_each(|w| *w = *w * scale);
                vb.iter_mut().for_each(|w| *w = *w * scale);
                scale = T::one();
            }
        }
        v.iter_mut().for_each(|w| *w = *w * scale);
        vb.iter_mut().for_each(|w| *w = *w * scale);

        let candidate = LinearSvc::from_parts(dim, v.clone(), vb, params.clone());
        let obj = svc_objective(&candidate, x, y);
        let last = *objective.last().unwrap();
        if obj <= last {
            best = candidate;
            objective.push(obj);
            if last - obj < T::of(params.tol) {
                break;
            }
        } else {
            rejected += 1;
            v.clone_from(&best.weights);
            vb = best.bias;
        }
    }
    Ok(SvcFit {
        model: best,
        objective,
        epochs,
        rejected_epochs: rejected,
    })
}
