//! Model-agnostic explanations: local surrogate term ranking, enterprise
//! enrichment, sector-lexicon validation and template rendering.

mod enterprise;
mod similarity;
mod surrogate;
mod template;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::TrainedClassifier;
use crate::corpus::{Confusion, SectorLabel, Transaction};
use crate::scalar::{argmax, total_cmp, Real};
use crate::textprep::{preprocess, NormalizationConfig, ProcessedDoc};

pub use enterprise::{
    build_lexicon, load_enterprises, parse_enterprises, select_enterprise_terms, select_enterprise_verbs,
    shipped_enterprises, EnterpriseIndex, EnterpriseRecord, SectorBag, SectorLexicon, ENTERPRISES_PER_SECTOR,
    MAX_ENTERPRISE_TERMS, VERBS_PER_ENTERPRISE,
};
pub use similarity::{jaccard_similarity, proximity_similarity, Metric, PROXIMITY_THRESHOLD};
pub use surrogate::{
    apply_mask, fit_local_surrogate, kernel_weight, perturb_and_weight, perturb_with, DocScorer, Perturbation,
    SamplingMode, SurrogateFit, SurrogateSettings, EXHAUSTIVE_LIMIT,
};
pub use template::{render_template, Language, NO_TERMS_EN, NO_TERMS_ES};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("nothing to explain")]
    NothingToExplain,
    #[error("empty term list")]
    EmptyTerms,
    #[error("degenerate perturbation design")]
    DegenerateDesign,
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error("unknown metric {0:?}, expected jaccard or proximity")]
    UnknownMetric(String),
    #[error("enterprise corpus: {0}")]
    BadEnterprise(String),
    #[error("sector lexicon: {0}")]
    BadLexicon(String),
    #[error("annotations, line {line}: {message}")]
    Annotation { line: u64, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn read_file(path: &Path) -> Result<String, ExplainError> {
    std::fs::read_to_string(path).map_err(|source| ExplainError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Validated,
    Obvious,
    Empty,
    NeedsReview,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [Self::Validated, Self::Obvious, Self::Empty, Self::NeedsReview];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Validated => "validated",
            Self::Obvious => "obvious",
            Self::Empty => "empty",
            Self::NeedsReview => "needs_review",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub transaction_id: String,
    pub predicted: SectorLabel,
    /// Descending by absolute weight.
    pub terms: Vec<WeightedTerm>,
    pub enrichment_terms: Vec<String>,
    pub matched_enterprises: Vec<String>,
    pub similarity_per_sector: BTreeMap<SectorLabel, f64>,
    pub verdict: Verdict,
    pub fidelity_r2: Option<f64>,
    pub seed: u64,
    pub rendered_en: String,
    pub rendered_es: String,
}

impl Explanation {
    pub fn empty(id: &str, predicted: SectorLabel) -> Self {
        Self {
            transaction_id: id.to_string(),
            predicted,
            terms: Vec::new(),
            enrichment_terms: Vec::new(),
            matched_enterprises: Vec::new(),
            similarity_per_sector: SectorLabel::ALL.iter().map(|&s| (s, 0.0)).collect(),
            verdict: Verdict::Empty,
            fidelity_r2: None,
            seed: 0,
            rendered_en: String::new(),
            rendered_es: String::new(),
        }
    }

    /// Explanation terms followed by enrichment terms, without repeats.
    pub fn all_terms(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.terms
            .iter()
            .map(|t| t.term.as_str())
            .chain(self.enrichment_terms.iter().map(String::as_str))
            .filter(|t| seen.insert(*t))
            .collect()
    }

    /// Most similar sector, ties to the lower sector index.
    pub fn most_similar_sector(&self) -> SectorLabel {
        let sims: Vec<f64> = SectorLabel::ALL
            .iter()
            .map(|s| self.similarity_per_sector.get(s).copied().unwrap_or(0.0))
            .collect();
        SectorLabel::ALL[argmax(&sims)]
    }

    pub fn render(&mut self) {
        self.rendered_en = render_template(self, Language::En);
        self.rendered_es = render_template(self, Language::Es);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainSettings {
    pub top_k: usize,
    pub metric: Metric,
    /// Master seed; each transaction derives its own stream from it.
    pub seed: u64,
    pub surrogate: SurrogateSettings,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        Self {
            top_k: 10,
            metric: Metric::Proximity,
            seed: 0,
            surrogate: SurrogateSettings::default(),
        }
    }
}

/// First eight bytes of `sha256(master_seed_le ‖ id)`, little-endian.
pub fn transaction_seed(master: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Picks up to `top_k` tokens (positive coefficients first, by size, then
/// the rest by magnitude), adds bigram terms for selected tokens adjacent in
/// the doc (weighted by the weaker constituent), and orders everything by
/// descending magnitude, stable so that a bigram follows its constituents.
pub fn rank_terms<T: Real>(fit: &SurrogateFit<T>, doc: &ProcessedDoc, top_k: usize) -> Vec<WeightedTerm> {
    let n = fit.tokens.len();
    let coef = |i: usize| fit.coefficients[i].as_f64();
    let mut positive: Vec<usize> = (0..n).filter(|&i| coef(i) > 0.0).collect();
    positive.sort_by(|&a, &b| coef(b).total_cmp(&coef(a)));
    let mut rest: Vec<usize> = (0..n).filter(|&i| coef(i) <= 0.0).collect();
    rest.sort_by(|&a, &b| coef(b).abs().total_cmp(&coef(a).abs()));
    let chosen: Vec<usize> = positive.into_iter().chain(rest).take(top_k).collect();

    let weight_of = |t: &str| {
        chosen
            .iter()
            .find(|&&i| fit.tokens[i] == t)
            .map(|&i| coef(i))
    };
    let mut terms: Vec<WeightedTerm> = chosen
        .iter()
        .map(|&i| WeightedTerm {
            term: fit.tokens[i].clone(),
            weight: coef(i),
        })
        .collect();
    let mut seen = HashSet::new();
    for w in doc.lemmas.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        if let (Some(a), Some(b)) = (weight_of(&w[0]), weight_of(&w[1])) {
            let term = format!("{} {}", w[0], w[1]);
            if seen.insert(term.clone()) {
                let weight = if b.abs() < a.abs() { b } else { a };
                terms.push(WeightedTerm { term, weight });
            }
        }
    }
    terms.sort_by(|a, b| total_cmp(b.weight.abs(), a.weight.abs()));
    terms.truncate(top_k);
    terms
}

/// Appends the summary terms of every enterprise named in `doc`, skipping
/// terms already present.
pub fn enrich_explanation(mut x: Explanation, doc: &ProcessedDoc, enterprises: &EnterpriseIndex) -> Explanation {
    for i in enterprises.matches(doc) {
        let name = &enterprises.records()[i].name;
        if !x.matched_enterprises.contains(name) {
            x.matched_enterprises.push(name.clone());
        }
        for t in enterprises.terms(i) {
            let dup = x.terms.iter().any(|w| &w.term == t) || x.enrichment_terms.contains(t);
            if !dup {
                x.enrichment_terms.push(t.clone());
            }
        }
    }
    x
}

/// Verdict and per-sector similarity of the explanation's terms.
///
/// Empty when there are no terms or nothing is similar to any sector;
/// otherwise obvious when a matched enterprise belongs to the predicted
/// sector; otherwise validated when the predicted sector is the unique most
/// similar one; otherwise left for human review.
pub fn validate_explanation(
    x: &Explanation,
    lexicon: &SectorLexicon,
    enterprises: &EnterpriseIndex,
    metric: Metric,
) -> (Verdict, BTreeMap<SectorLabel, f64>) {
    let terms = x.all_terms();
    let sims: BTreeMap<SectorLabel, f64> = SectorLabel::ALL
        .iter()
        .map(|&s| (s, metric.score(&terms, &lexicon.terms(s))))
        .collect();
    if terms.is_empty() || sims.values().all(|&v| v == 0.0) {
        return (Verdict::Empty, sims);
    }
    let obvious = x.matched_enterprises.iter().any(|name| {
        enterprises
            .by_name(name)
            .is_some_and(|i| enterprises.records()[i].sector == x.predicted)
    });
    if obvious {
        return (Verdict::Obvious, sims);
    }
    let best = sims.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<SectorLabel> = sims.iter().filter(|(_, &v)| v == best).map(|(&s, _)| s).collect();
    if top == [x.predicted] {
        (Verdict::Validated, sims)
    } else {
        (Verdict::NeedsReview, sims)
    }
}

/// Explains one transaction end to end: surrogate, ranking, enrichment,
/// validation and rendering.
pub fn explain_transaction<T: Real>(
    t: &Transaction,
    model: &TrainedClassifier<T>,
    cfg: &NormalizationConfig,
    enterprises: &EnterpriseIndex,
    lexicon: &SectorLexicon,
    settings: &ExplainSettings,
) -> Result<Explanation, ExplainError> {
    let doc = preprocess(&t.id, &t.description, cfg);
    let scores = model.score_doc(&doc);
    let predicted = SectorLabel::ALL[argmax(&scores)];
    let seed = transaction_seed(settings.seed, &t.id);
    let mut x = Explanation::empty(&t.id, predicted);
    x.seed = seed;
    if doc.is_empty() {
        x.render();
        return Ok(x);
    }
    let samples = perturb_with::<T>(&doc, &settings.surrogate, seed)?;
    let fit = fit_local_surrogate(&doc, model, predicted, &samples, T::of(settings.surrogate.ridge))?;
    x.terms = rank_terms(&fit, &doc, settings.top_k);
    x.fidelity_r2 = Some(fit.fidelity_r2.as_f64());
    let mut x = enrich_explanation(x, &doc, enterprises);
    let (verdict, sims) = validate_explanation(&x, lexicon, enterprises, settings.metric);
    x.verdict = verdict;
    x.similarity_per_sector = sims;
    x.render();
    Ok(x)
}

/// Explains a batch in parallel; output order follows the input.
pub fn explain_all<T: Real>(
    corpus: &[Transaction],
    model: &TrainedClassifier<T>,
    cfg: &NormalizationConfig,
    enterprises: &EnterpriseIndex,
    lexicon: &SectorLexicon,
    settings: &ExplainSettings,
) -> Result<Vec<Explanation>, ExplainError> {
    corpus
        .par_iter()
        .map(|t| explain_transaction(t, model, cfg, enterprises, lexicon, settings))
        .collect()
}

/// Rows: predicted sector. Columns: most similar sector. Empty verdicts are
/// left out.
pub fn sector_confusion(explanations: &[Explanation]) -> Confusion {
    let mut m = Confusion::default();
    for x in explanations.iter().filter(|x| x.verdict != Verdict::Empty) {
        m.add(x.predicted, x.most_similar_sector());
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Coherent,
    Ambiguous,
}

/// Reads `transaction_id,judgment` rows with judgments `coherent` or
/// `ambiguous`.
pub fn read_annotations<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, Judgment>, ExplainError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 || header[0] != "transaction_id" {
        return Err(ExplainError::Annotation {
            line: 1,
            message: "expected header transaction_id,judgment".into(),
        });
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let judgment = match rec.get(1).map(|s| s.trim().to_ascii_lowercase()).as_deref() {
            Some("coherent") => Judgment::Coherent,
            Some("ambiguous") => Judgment::Ambiguous,
            other => {
                return Err(ExplainError::Annotation {
                    line,
                    message: format!("unknown judgment {:?}", other.unwrap_or("")),
                })
            }
        };
        out.insert(rec[0].trim().to_string(), judgment);
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<BTreeMap<String, Judgment>, ExplainError> {
    let f = std::fs::File::open(path).map_err(|source| ExplainError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_annotations(f)
}

/// Verdict shares, optionally refined by human judgments of the
/// needs-review items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    pub percentages: BTreeMap<String, f64>,
    /// validated / obvious / coherent / ambiguous / empty (+ unreviewed).
    pub five_way: Option<BTreeMap<String, f64>>,
    pub sector_confusion: Confusion,
}

fn shares(counts: &BTreeMap<String, usize>, total: usize) -> BTreeMap<String, f64> {
    counts
        .iter()
        .map(|(k, &v)| {
            let pct = if total == 0 { 0.0 } else { 100.0 * v as f64 / total as f64 };
            (k.clone(), pct)
        })
        .collect()
}

pub fn summarize(explanations: &[Explanation], annotations: Option<&BTreeMap<String, Judgment>>) -> VerdictSummary {
    let total = explanations.len();
    let mut counts: BTreeMap<String, usize> = Verdict::ALL.iter().map(|v| (v.as_str().to_string(), 0)).collect();
    for x in explanations {
        *counts.get_mut(x.verdict.as_str()).unwrap() += 1;
    }
    let five_way = annotations.map(|ann| {
        let mut c: BTreeMap<String, usize> = ["validated", "obvious", "coherent", "ambiguous", "empty", "unreviewed"]
            .iter()
            .map(|k| (k.to_string(), 0))
            .collect();
        for x in explanations {
            let key = match x.verdict {
                Verdict::NeedsReview => match ann.get(&x.transaction_id) {
                    Some(Judgment::Coherent) => "coherent",
                    Some(Judgment::Ambiguous) => "ambiguous",
                    None => "unreviewed",
                },
                v => v.as_str(),
            };
            *c.get_mut(key).unwrap() += 1;
        }
        shares(&c, total)
    });
    VerdictSummary {
        total,
        percentages: shares(&counts, total),
        counts,
        five_way,
        sector_confusion: sector_confusion(explanations),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NormalizationConfig {
        NormalizationConfig::shipped()
    }

    fn with_terms(id: &str, predicted: SectorLabel, terms: &[&str]) -> Explanation {
        let mut x = Explanation::empty(id, predicted);
        x.terms = terms
            .iter()
            .map(|t| WeightedTerm {
                term: t.to_string(),
                weight: 1.0,
            })
            .collect();
        x
    }

    #[test]
    fn validated_when_terms_equal_the_bag() {
        let lex = SectorLexicon::shipped();
        let idx = EnterpriseIndex::empty();
        for s in SectorLabel::ALL {
            let terms = lex.terms(s);
            let x = with_terms("1", s, &terms);
            for m in [Metric::Jaccard, Metric::Proximity] {
                assert_eq!(validate_explanation(&x, &lex, &idx, m).0, Verdict::Validated, "{s} {m}");
            }
        }
    }

    #[test]
    fn residue_is_empty() {
        let lex = SectorLexicon::shipped();
        let x = with_terms("1", SectorLabel::Flights, &["qzx", "bo"]);
        assert_eq!(validate_explanation(&x, &lex, &EnterpriseIndex::empty(), Metric::Proximity).0, Verdict::Empty);
        let x = with_terms("1", SectorLabel::Flights, &[]);
        assert_eq!(validate_explanation(&x, &lex, &EnterpriseIndex::empty(), Metric::Jaccard).0, Verdict::Empty);
    }

    #[test]
    fn iberdrola_is_obvious() {
        let c = cfg();
        let idx = EnterpriseIndex::new(shipped_enterprises(), &c).unwrap();
        let doc = preprocess("9", &"RECIBO IBERDROLA CLIENTES, S.A.U".into(), &c);
        let x = with_terms("9", SectorLabel::ElectricityBill, &["iberdrola", "recibo"]);
        let x = enrich_explanation(x, &doc, &idx);
        assert_eq!(x.matched_enterprises, ["IBERDROLA"]);
        let iberdrola = idx.by_name("IBERDROLA").unwrap();
        assert!(idx.terms(iberdrola).iter().all(|t| x.all_terms().contains(&t.as_str())));
        let (v, _) = validate_explanation(&x, &SectorLexicon::shipped(), &idx, Metric::Proximity);
        assert_eq!(v, Verdict::Obvious);
    }

    #[test]
    fn enrichment_dedups_and_no_match() {
        let c = cfg();
        let idx = EnterpriseIndex::new(shipped_enterprises(), &c).unwrap();
        let doc = preprocess_doc("PAGO RENFE", &c);
        let iberdrola = idx.by_name("RENFE").unwrap();
        let all: Vec<&str> = idx.terms(iberdrola).iter().map(String::as_str).collect();
        let x = enrich_explanation(with_terms("1", SectorLabel::PublicTransport, &all), &doc, &idx);
        assert!(x.enrichment_terms.is_empty());
        let x = enrich_explanation(with_terms("1", SectorLabel::PublicTransport, &["x"]), &preprocess_doc("PAGO", &c), &idx);
        assert!(x.enrichment_terms.is_empty() && x.matched_enterprises.is_empty());
    }

    fn preprocess_doc(s: &str, c: &NormalizationConfig) -> ProcessedDoc {
        crate::textprep::preprocess_text(s, c)
    }

    #[test]
    fn ranking_orders_by_magnitude_and_adds_bigrams() {
        let doc = ProcessedDoc::from_tokens(&["recibo", "agua", "madrid"]);
        let fit = SurrogateFit {
            tokens: vec!["recibo".into(), "agua".into(), "madrid".into()],
            coefficients: vec![0.5f64, 2.0, -0.1],
            intercept: 0.0,
            fidelity_r2: 1.0,
        };
        let t = rank_terms(&fit, &doc, 10);
        let names: Vec<&str> = t.iter().map(|w| w.term.as_str()).collect();
        assert_eq!(names, ["agua", "recibo", "recibo agua", "madrid", "agua madrid"]);
        assert!(t.windows(2).all(|w| w[0].weight.abs() >= w[1].weight.abs()));
        assert_eq!(rank_terms(&fit, &doc, 2).len(), 2);
    }

    #[test]
    fn confusion_skips_empty() {
        let mut a = with_terms("1", SectorLabel::ElectricityBill, &["luz"]);
        a.similarity_per_sector.insert(SectorLabel::PublicTransport, 0.4);
        a.verdict = Verdict::NeedsReview;
        let mut b = with_terms("2", SectorLabel::Flights, &["vuelo"]);
        b.similarity_per_sector.insert(SectorLabel::Flights, 1.0);
        b.verdict = Verdict::Validated;
        let c = Explanation::empty("3", SectorLabel::GasBill);
        let m = sector_confusion(&[a, b, c]);
        assert_eq!(m.0[SectorLabel::ElectricityBill.index()][SectorLabel::PublicTransport.index()], 1);
        assert_eq!(m.0[SectorLabel::Flights.index()][SectorLabel::Flights.index()], 1);
        assert_eq!(m.total(), 2);
    }

    #[test]
    fn seeds_depend_on_id() {
        assert_eq!(transaction_seed(7, "a"), transaction_seed(7, "a"));
        assert_ne!(transaction_seed(7, "a"), transaction_seed(7, "b"));
        assert_ne!(transaction_seed(7, "a"), transaction_seed(8, "a"));
    }

    #[test]
    fn annotations_and_five_way() {
        let ann = read_annotations("transaction_id,judgment\n1,coherent\n2,ambiguous\n".as_bytes()).unwrap();
        let mut xs = vec![
            with_terms("1", SectorLabel::Flights, &["a"]),
            with_terms("2", SectorLabel::Flights, &["a"]),
            with_terms("3", SectorLabel::Flights, &["a"]),
        ];
        for x in xs.iter_mut() {
            x.verdict = Verdict::NeedsReview;
        }
        xs[2].verdict = Verdict::Validated;
        let s = summarize(&xs, Some(&ann));
        let five = s.five_way.unwrap();
        assert!((five["coherent"] - 100.0 / 3.0).abs() < 1e-9);
        assert!((five.values().sum::<f64>() - 100.0).abs() < 1e-9);
        assert!((s.percentages.values().sum::<f64>() - 100.0).abs() < 1e-9);
        assert!(read_annotations("transaction_id,judgment\n1,great\n".as_bytes()).is_err());
    }
}
