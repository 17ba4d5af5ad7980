//! Perturbation sampling and the weighted ridge surrogate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::classify::TrainedClassifier;
use crate::corpus::{SectorLabel, N_SECTORS};
use crate::linalg::solve;
use crate::scalar::Real;
use crate::textprep::ProcessedDoc;

/// Largest mask space enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Exhaustive when the mask space fits [`EXHAUSTIVE_LIMIT`], else sampled.
    #[default]
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSettings {
    pub n_samples: usize,
    /// Kernel width over the fraction of removed tokens.
    pub sigma: f64,
    pub ridge: f64,
    pub mode: SamplingMode,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            sigma: 0.25,
            ridge: 1.0,
            mode: SamplingMode::Auto,
        }
    }
}

/// Anything that scores a processed document per class. The explainer only
/// ever queries this, never model internals.
pub trait DocScorer<T> {
    fn score_doc(&self, doc: &ProcessedDoc) -> [T; N_SECTORS];
}

impl<T: Real> DocScorer<T> for TrainedClassifier<T> {
    fn score_doc(&self, doc: &ProcessedDoc) -> [T; N_SECTORS] {
        self.decision_scores(&self.vectorize(doc))
            .expect("vectorize matches the model dimension")
    }
}

/// One perturbation: which distinct tokens are kept, and its kernel weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation<T> {
    pub mask: Vec<bool>,
    pub weight: T,
}

/// `exp(-d² / σ²)` where `d` is the fraction of tokens removed.
pub fn kernel_weight<T: Real>(removed_fraction: T, sigma: T) -> T {
    (-(removed_fraction * removed_fraction) / (sigma * sigma)).exp()
}

fn perturbation<T: Real>(mask: Vec<bool>, sigma: T) -> Perturbation<T> {
    let n = mask.len();
    let removed = mask.iter().filter(|&&b| !b).count();
    let weight = kernel_weight(T::of_usize(removed) / T::of_usize(n), sigma);
    Perturbation { mask, weight }
}

/// Masks over the distinct tokens of `doc` with default settings.
pub fn perturb_and_weight<T: Real>(
    doc: &ProcessedDoc,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Perturbation<T>>, ExplainError> {
    let settings = SurrogateSettings {
        n_samples,
        ..SurrogateSettings::default()
    };
    perturb_with(doc, &settings, seed)
}

/// Exhaustive enumeration lists masks in binary counting order. Sampled mode
/// starts with the all-ones mask followed by `n_samples - 1` uniform masks.
pub fn perturb_with<T: Real>(
    doc: &ProcessedDoc,
    settings: &SurrogateSettings,
    seed: u64,
) -> Result<Vec<Perturbation<T>>, ExplainError> {
    let n = doc.distinct().len();
    if n == 0 {
        return Err(ExplainError::NothingToExplain);
    }
    let sigma = T::of(settings.sigma);
    let fits = n < usize::BITS as usize && (1usize << n) <= EXHAUSTIVE_LIMIT;
    let exhaustive = match settings.mode {
        SamplingMode::Auto => fits,
        SamplingMode::Exhaustive if !fits => {
            return Err(ExplainError::InvalidSetting(format!(
                "{n} tokens are too many for exhaustive enumeration"
            )))
        }
        SamplingMode::Exhaustive => true,
        SamplingMode::Sampled => false,
    };
    if exhaustive {
        return Ok((0..1usize << n)
            .map(|m| perturbation((0..n).map(|i| m >> i & 1 == 1).collect(), sigma))
            .collect());
    }
    if settings.n_samples < 2 {
        return Err(ExplainError::InvalidSetting("n_samples must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(settings.n_samples);
    out.push(perturbation(vec![true; n], sigma));
    for _ in 1..settings.n_samples {
        let mask = (0..n).map(|_| rng.random_bool(0.5)).collect();
        out.push(perturbation(mask, sigma));
    }
    Ok(out)
}

/// `doc` with every occurrence of each masked-out distinct token removed.
pub fn apply_mask(doc: &ProcessedDoc, tokens: &[&str], mask: &[bool]) -> ProcessedDoc {
    let lemmas = doc
        .lemmas
        .iter()
        .filter(|l| {
            let i = tokens.iter().position(|t| t == l).expect("token of this doc");
            mask[i]
        })
        .cloned()
        .collect();
    ProcessedDoc::new(doc.source_id.clone(), lemmas)
}

/// Weighted linear fit of the target-class score on the token masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit<T> {
    /// Distinct tokens in first-occurrence order.
    pub tokens: Vec<String>,
    pub coefficients: Vec<T>,
    pub intercept: T,
    pub fidelity_r2: T,
}

impl<T: Real> SurrogateFit<T> {
    /// Token with the largest coefficient; ties go to the earlier token.
    pub fn top_token(&self) -> &str {
        &self.tokens[crate::scalar::argmax(&self.coefficients)]
    }
}

/// Ridge regression (`ridge` on the coefficients, intercept free) of the
/// model's `target` score on the binary masks, weighted by the kernel.
pub fn fit_local_surrogate<T: Real, M: DocScorer<T> + ?Sized>(
    doc: &ProcessedDoc,
    model: &M,
    target: SectorLabel,
    samples: &[Perturbation<T>],
    ridge: T,
) -> Result<SurrogateFit<T>, ExplainError> {
    let tokens = doc.distinct();
    let n = tokens.len();
    if n == 0 {
        return Err(ExplainError::NothingToExplain);
    }
    if samples.is_empty() || samples.iter().all(|s| s.mask == samples[0].mask) {
        return Err(ExplainError::DegenerateDesign);
    }
    let targets: Vec<T> = samples
        .iter()
        .map(|s| model.score_doc(&apply_mask(doc, &tokens, &s.mask))[target.index()])
        .collect();

    // normal equations over [1, z_1..z_n]
    let p = n + 1;
    let mut a = vec![vec![T::zero(); p]; p];
    let mut b = vec![T::zero(); p];
    for (s, &y) in samples.iter().zip(&targets) {
        let active: Vec<usize> = std::iter::once(0)
            .chain((0..n).filter(|&i| s.mask[i]).map(|i| i + 1))
            .collect();
        for &i in &active {
            b[i] = b[i] + s.weight * y;
            for &j in &active {
                a[i][j] = a[i][j] + s.weight;
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] = row[i] + ridge;
    }
    let beta = solve(a, b).ok_or(ExplainError::DegenerateDesign)?;

    let wsum: T = samples.iter().map(|s| s.weight).sum();
    let mean = samples
        .iter()
        .zip(&targets)
        .map(|(s, &y)| s.weight * y)
        .sum::<T>()
        / wsum;
    let (mut ss_res, mut ss_tot) = (T::zero(), T::zero());
    for (s, &y) in samples.iter().zip(&targets) {
        let fitted = beta[0]
            + (0..n)
                .filter(|&i| s.mask[i])
                .map(|i| beta[i + 1])
                .sum::<T>();
        ss_res = ss_res + s.weight * (y - fitted) * (y - fitted);
        ss_tot = ss_tot + s.weight * (y - mean) * (y - mean);
    }
    let fidelity_r2 = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::one()
    };
    Ok(SurrogateFit {
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        coefficients: beta[1..].to_vec(),
        intercept: beta[0],
        fidelity_r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Target score = count of `key` in the doc.
    struct CountModel(&'static str);

    impl DocScorer<f64> for CountModel {
        fn score_doc(&self, doc: &ProcessedDoc) -> [f64; N_SECTORS] {
            let mut s = [0.0; N_SECTORS];
            s[0] = doc.lemmas.iter().filter(|l| *l == self.0).count() as f64;
            s
        }
    }

    fn doc(t: &[&str]) -> ProcessedDoc {
        ProcessedDoc::from_tokens(t)
    }

    #[test]
    fn mask_counts_and_weights() {
        let s = perturb_and_weight::<f64>(&doc(&["a", "b", "c"]), 1000, 1).unwrap();
        assert_eq!(s.len(), 8);
        let ones = s.iter().find(|p| p.mask.iter().all(|&b| b)).unwrap();
        assert_eq!(ones.weight, 1.0);
        let zeros = s.iter().find(|p| p.mask.iter().all(|&b| !b)).unwrap();
        assert!((zeros.weight - (-16.0f64).exp()).abs() < 1e-15);
        assert!((zeros.weight - 1.1e-7).abs() < 1e-8);
        assert!(matches!(
            perturb_and_weight::<f64>(&doc(&[]), 10, 0),
            Err(ExplainError::NothingToExplain)
        ));
    }

    #[test]
    fn large_docs_are_sampled() {
        let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
        let d = ProcessedDoc::new("x", words);
        let s = perturb_and_weight::<f64>(&d, 300, 5).unwrap();
        assert_eq!(s.len(), 300);
        assert!(s[0].mask.iter().all(|&b| b));
        assert_eq!(s, perturb_and_weight::<f64>(&d, 300, 5).unwrap());
    }

    #[test]
    fn single_driver_token_dominates() {
        let d = doc(&["recibo", "agua", "madrid", "agua"]);
        let samples = perturb_and_weight::<f64>(&d, 1000, 0).unwrap();
        let fit = fit_local_surrogate(&d, &CountModel("agua"), SectorLabel::ALL[0], &samples, 1.0).unwrap();
        let agua = fit.tokens.iter().position(|t| t == "agua").unwrap();
        assert!(fit.coefficients[agua] > 0.0);
        for (i, c) in fit.coefficients.iter().enumerate() {
            if i != agua {
                assert!(fit.coefficients[agua].abs() > c.abs());
            }
        }
        assert_eq!(fit.top_token(), "agua");
        // the default ridge shrinks hard when kernel mass is small
        assert!(fit.fidelity_r2 > 0.0 && fit.fidelity_r2 <= 1.0);
        let exact = fit_local_surrogate(&d, &CountModel("agua"), SectorLabel::ALL[0], &samples, 1e-9).unwrap();
        assert!(exact.fidelity_r2 > 0.999999, "{}", exact.fidelity_r2);
        assert!((exact.coefficients[agua] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn exhaustive_ignores_seed() {
        let d = doc(&["pago", "gasolinera", "repsol"]);
        let m = CountModel("gasolinera");
        let fit = |seed| {
            let s = perturb_and_weight::<f64>(&d, 1000, seed).unwrap();
            fit_local_surrogate(&d, &m, SectorLabel::ALL[0], &s, 1.0).unwrap()
        };
        assert_eq!(fit(1), fit(99));
    }

    #[test]
    fn degenerate_design() {
        let d = doc(&["a", "b"]);
        let one = vec![
            Perturbation {
                mask: vec![true, true],
                weight: 1.0,
            };
            3
        ];
        assert!(matches!(
            fit_local_surrogate(&d, &CountModel("a"), SectorLabel::ALL[0], &one, 1.0),
            Err(ExplainError::DegenerateDesign)
        ));
    }
}
