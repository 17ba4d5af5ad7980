//! End-to-end commands: train, explain, footprint and report.
//!
//! Each command reads its inputs, does the parallel work in memory and
//! writes its outputs once at the end. Every output carries the
//! normalization config hash and the master seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carbon::{estimate_footprint, CarbonError, EmissionParams, FootprintEstimate, Unit};
use crate::classify::{
    read_model, write_model, ClassifierKind, ClassifierParams, ClassifyError, RfParams, SvcParams,
    TrainedClassifier,
};
use crate::corpus::{
    deduplicate, labels_of, load_transactions, score_predictions, stratified_folds_by_label, CorpusError,
    EvalReport, SectorLabel, Transaction, DEFAULT_DEDUP_THRESHOLD,
};
use crate::explain::{
    build_lexicon, explain_all, load_annotations, load_enterprises, shipped_enterprises, summarize,
    EnterpriseIndex, ExplainError, ExplainSettings, Explanation, Metric, SectorLexicon, VerdictSummary,
};
use crate::features::{fit_selected, FeatureError, DEFAULT_PERCENTILE};
use crate::scalar::Real;
use crate::textprep::{preprocess, NormalizationConfig, ProcessedDoc, TextprepError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("no emission parameters for predicted sectors: {0}")]
    Coverage(String),
    #[error("invalid gate {0:?}")]
    Gate(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Carbon(#[from] CarbonError),
    #[error(transparent)]
    Textprep(#[from] TextprepError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn to_json_bytes<S: Serialize>(value: &S) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("report serializes");
    s.push(b'\n');
    s
}

/// Paths are resolved against the config file's directory; absent paths
/// fall back to the bundled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub normalization: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub enterprises: Option<PathBuf>,
    pub emission_params: Option<PathBuf>,
    pub classifier: ClassifierKind,
    pub svc: SvcParams,
    pub rf: RfParams,
    pub percentile: u32,
    pub dedup_threshold: f64,
    pub folds: usize,
    pub seed: u64,
    pub top_k: usize,
    pub n_samples: usize,
    pub metric: Metric,
    /// Report gates such as `min_validated=0.9`.
    pub gates: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let explain = ExplainSettings::default();
        Self {
            normalization: None,
            lexicon: None,
            enterprises: None,
            emission_params: None,
            classifier: ClassifierKind::Svc,
            svc: SvcParams::default(),
            rf: RfParams::default(),
            percentile: DEFAULT_PERCENTILE,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            folds: 10,
            seed: 7,
            top_k: explain.top_k,
            n_samples: explain.surrogate.n_samples,
            metric: explain.metric,
            gates: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let mut cfg: Self = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.normalization,
            &mut cfg.lexicon,
            &mut cfg.enterprises,
            &mut cfg.emission_params,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for p in [&self.normalization, &self.lexicon, &self.enterprises, &self.emission_params]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.folds < 2 {
            return Err(PipelineError::Config("folds must be at least 2".into()));
        }
        if self.percentile == 0 || self.percentile > 100 {
            return Err(PipelineError::Config("percentile must be in 1..=100".into()));
        }
        if self.top_k == 0 {
            return Err(PipelineError::Config("top_k must be positive".into()));
        }
        for g in &self.gates {
            g.parse::<Gate>()?;
        }
        Ok(())
    }

    /// Learner hyperparameters, seeded with the master seed.
    pub fn classifier_params(&self) -> ClassifierParams {
        match self.classifier {
            ClassifierKind::Svc => ClassifierParams::Svc(SvcParams {
                seed: self.seed,
                ..self.svc.clone()
            }),
            ClassifierKind::Rf => ClassifierParams::Rf(RfParams {
                seed: self.seed,
                ..self.rf.clone()
            }),
        }
    }

    pub fn explain_settings(&self) -> ExplainSettings {
        let mut s = ExplainSettings {
            top_k: self.top_k,
            metric: self.metric,
            seed: self.seed,
            ..ExplainSettings::default()
        };
        s.surrogate.n_samples = self.n_samples;
        s
    }
}

/// Loaded normalization config, enterprise index, lexicon and emission table.
#[derive(Debug, Clone)]
pub struct Resources {
    pub normalization: NormalizationConfig,
    pub enterprises: EnterpriseIndex,
    pub lexicon: SectorLexicon,
    pub emission: EmissionParams,
}

impl Resources {
    pub fn shipped() -> Self {
        Self::load(&PipelineConfig::default()).expect("bundled resources are valid")
    }

    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let normalization = match &cfg.normalization {
            Some(p) => NormalizationConfig::load(p)?,
            None => NormalizationConfig::shipped(),
        };
        let records = match &cfg.enterprises {
            Some(p) => load_enterprises(p)?,
            None => shipped_enterprises(),
        };
        let lexicon = match (&cfg.lexicon, &cfg.enterprises) {
            (Some(p), _) => SectorLexicon::load(p)?,
            (None, Some(_)) => build_lexicon(&records, &normalization)?,
            (None, None) => SectorLexicon::shipped(),
        };
        let enterprises = EnterpriseIndex::new(records, &normalization)?;
        let emission = match &cfg.emission_params {
            Some(p) => EmissionParams::load(p)?,
            None => EmissionParams::shipped(),
        };
        Ok(Self {
            normalization,
            enterprises,
            lexicon,
            emission,
        })
    }

    pub fn config_hash(&self) -> String {
        self.normalization.hash_hex()
    }

    pub fn preprocess_all(&self, corpus: &[Transaction]) -> Vec<ProcessedDoc> {
        corpus
            .par_iter()
            .map(|t| preprocess(&t.id, &t.description, &self.normalization))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub n_input: usize,
    pub n_deduplicated: usize,
    pub percentile: u32,
    pub vocabulary_size: usize,
    pub selected_features: usize,
    pub evaluation: EvalReport,
}

pub struct TrainOutcome<T: Real> {
    pub model: TrainedClassifier<T>,
    pub report: TrainReport,
}

/// Dedup, preprocessing, stratified k-fold evaluation, then a final model
/// on all remaining rows.
pub fn train_and_evaluate<T: Real>(
    corpus: &[Transaction],
    cfg: &PipelineConfig,
    res: &Resources,
) -> Result<TrainOutcome<T>, PipelineError> {
    labels_of(corpus)?;
    let kept = deduplicate(corpus, cfg.dedup_threshold);
    let docs = res.preprocess_all(&kept);
    let y = labels_of(&kept)?;
    let params = cfg.classifier_params();
    let hash = res.normalization.hash();

    let mut per_fold = Vec::with_capacity(cfg.folds);
    for fold in stratified_folds_by_label(&y, cfg.folds, cfg.seed)? {
        let train_docs: Vec<ProcessedDoc> = fold.train.iter().map(|&i| docs[i].clone()).collect();
        let train_y: Vec<SectorLabel> = fold.train.iter().map(|&i| y[i]).collect();
        let start = Instant::now();
        let space = fit_selected::<T>(&train_docs, &train_y, cfg.percentile)?;
        let model = TrainedClassifier::train(space, hash, &train_docs, &train_y, &params)?;
        let elapsed = start.elapsed().as_secs_f64();
        let pred: Vec<SectorLabel> = fold.test.par_iter().map(|&i| model.predict_doc(&docs[i])).collect();
        let gold: Vec<SectorLabel> = fold.test.iter().map(|&i| y[i]).collect();
        let mut scores = score_predictions(&gold, &pred)?;
        scores.training_time_s = elapsed;
        per_fold.push(scores);
    }
    let config_hash = res.config_hash();
    let evaluation = EvalReport::from_folds(cfg.classifier.as_str(), cfg.seed, &config_hash, per_fold);

    let space = fit_selected::<T>(&docs, &y, cfg.percentile)?;
    let (vocabulary_size, selected_features) = (space.vocabulary_size(), space.dim());
    let model = TrainedClassifier::train(space, hash, &docs, &y, &params)?;
    Ok(TrainOutcome {
        model,
        report: TrainReport {
            config_hash,
            master_seed: cfg.seed,
            n_input: corpus.len(),
            n_deduplicated: kept.len(),
            percentile: cfg.percentile,
            vocabulary_size,
            selected_features,
            evaluation,
        },
    })
}

pub fn model_bytes<T: Real>(model: &TrainedClassifier<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_model(&mut buf, model).expect("writing to memory cannot fail");
    buf
}

/// Trains on `input`, writes the model file and, when asked, the report.
pub fn cmd_train(
    cfg: &PipelineConfig,
    input: &Path,
    model_out: &Path,
    report_out: Option<&Path>,
) -> Result<TrainReport, PipelineError> {
    let res = Resources::load(cfg)?;
    let corpus = load_transactions(input)?;
    let out = train_and_evaluate::<f64>(&corpus, cfg, &res)?;
    write_bytes(model_out, &model_bytes(&out.model))?;
    if let Some(p) = report_out {
        write_bytes(p, &to_json_bytes(&out.report))?;
    }
    Ok(out.report)
}

/// Reads a model and checks it was trained under `res`'s normalization.
pub fn load_model(path: &Path, res: &Resources) -> Result<TrainedClassifier<f64>, PipelineError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(read_model(std::io::BufReader::new(file), Some(&res.normalization.hash()))?)
}

/// One line of the explanations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub config_hash: String,
    pub master_seed: u64,
    #[serde(flatten)]
    pub explanation: Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub classifier: ClassifierKind,
    pub metric: Metric,
    pub summary: VerdictSummary,
}

pub fn explanations_jsonl(explanations: &[Explanation], config_hash: &str, seed: u64) -> Vec<u8> {
    let mut out = Vec::new();
    for x in explanations {
        let rec = ExplanationRecord {
            config_hash: config_hash.to_string(),
            master_seed: seed,
            explanation: x.clone(),
        };
        serde_json::to_writer(&mut out, &rec).expect("explanation serializes");
        out.push(b'\n');
    }
    out
}

/// `<out>` with its extension replaced by `summary.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Explains every transaction, writing one JSON line each to `out` and the
/// verdict summary next to it.
pub fn cmd_explain(
    cfg: &PipelineConfig,
    model_path: &Path,
    input: &Path,
    out: &Path,
    annotations: Option<&Path>,
) -> Result<ExplainReport, PipelineError> {
    let res = Resources::load(cfg)?;
    let model = load_model(model_path, &res)?;
    let corpus = load_transactions(input)?;
    let annotations = annotations.map(load_annotations).transpose()?;
    let settings = cfg.explain_settings();
    let xs = explain_all(&corpus, &model, &res.normalization, &res.enterprises, &res.lexicon, &settings)?;
    let report = ExplainReport {
        config_hash: res.config_hash(),
        master_seed: cfg.seed,
        classifier: model.kind(),
        metric: settings.metric,
        summary: summarize(&xs, annotations.as_ref()),
    };
    write_bytes(out, &explanations_jsonl(&xs, &report.config_hash, cfg.seed))?;
    write_bytes(&summary_path(out), &to_json_bytes(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub estimates: Vec<FootprintEstimate<f64>>,
    /// kg CO₂ per sector; water is reported in liters only.
    pub totals_kg_by_sector: BTreeMap<SectorLabel, f64>,
    pub total_kg: f64,
    pub water_liters: f64,
}

/// Predicts each transaction's sector and estimates its footprint.
pub fn footprint_report<T: Real>(
    corpus: &[Transaction],
    model: &TrainedClassifier<T>,
    res: &Resources,
    seed: u64,
) -> Result<FootprintReport, PipelineError> {
    let docs = res.preprocess_all(corpus);
    let predicted: Vec<SectorLabel> = docs.par_iter().map(|d| model.predict_doc(d)).collect();
    let missing = res.emission.uncovered(predicted.iter().copied().collect::<BTreeSet<_>>());
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
        return Err(PipelineError::Coverage(names.join(", ")));
    }
    let estimates: Vec<FootprintEstimate<f64>> = corpus
        .par_iter()
        .zip(&docs)
        .zip(&predicted)
        .map(|((t, d), &s)| estimate_footprint::<f64>(t, s, d, &res.emission))
        .collect::<Result<_, _>>()?;
    let mut totals: BTreeMap<SectorLabel, f64> = BTreeMap::new();
    let mut water_liters = 0.0;
    for e in &estimates {
        match e.unit {
            Unit::KgCo2 => *totals.entry(e.sector).or_default() += e.quantity,
            Unit::Liters => water_liters += e.quantity,
        }
    }
    Ok(FootprintReport {
        config_hash: res.config_hash(),
        master_seed: seed,
        total_kg: totals.values().sum(),
        estimates,
        totals_kg_by_sector: totals,
        water_liters,
    })
}

pub fn cmd_footprint(
    cfg: &PipelineConfig,
    model_path: &Path,
    input: &Path,
    out: &Path,
) -> Result<FootprintReport, PipelineError> {
    let res = Resources::load(cfg)?;
    let model = load_model(model_path, &res)?;
    let corpus = load_transactions(input)?;
    let report = footprint_report(&corpus, &model, &res, cfg.seed)?;
    write_bytes(out, &to_json_bytes(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMetric {
    MinAccuracy,
    MinMacroPrecision,
    MinMacroRecall,
    MinValidated,
    /// Validated plus obvious.
    MinSatisfactory,
    MaxEmpty,
}

impl GateMetric {
    const NAMES: [(&'static str, GateMetric); 6] = [
        ("min_accuracy", Self::MinAccuracy),
        ("min_macro_precision", Self::MinMacroPrecision),
        ("min_macro_recall", Self::MinMacroRecall),
        ("min_validated", Self::MinValidated),
        ("min_satisfactory", Self::MinSatisfactory),
        ("max_empty", Self::MaxEmpty),
    ];

    fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, g)| *g == self).unwrap().0
    }
}

/// A threshold on a fraction in `[0, 1]`, written `name=value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub metric: GateMetric,
    pub threshold: f64,
}

impl FromStr for Gate {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        let bad = || PipelineError::Gate(s.to_string());
        let (name, value) = s.split_once('=').ok_or_else(bad)?;
        let metric = GateMetric::NAMES
            .iter()
            .find(|(n, _)| *n == name.trim())
            .map(|(_, g)| *g)
            .ok_or_else(bad)?;
        let threshold: f64 = value.trim().parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(bad());
        }
        Ok(Self { metric, threshold })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.metric.name(), self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateResult {
    pub gate: Gate,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub text: String,
    pub gates: Vec<GateResult>,
}

impl ReportOutcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

fn pct(summary: &VerdictSummary, key: &str) -> f64 {
    summary.percentages.get(key).copied().unwrap_or(0.0) / 100.0
}

/// Merges the three command outputs into a plain-text summary and checks
/// the gates.
pub fn render_report(
    train: &TrainReport,
    explain: &ExplainReport,
    footprint: &FootprintReport,
    gates: &[Gate],
) -> ReportOutcome {
    let ev = &train.evaluation;
    let s = &explain.summary;
    let mut t = String::new();
    let _ = writeln!(t, "# cfxplain report\n");
    let _ = writeln!(t, "config hash: {}", train.config_hash);
    let _ = writeln!(t, "master seed: {}\n", train.master_seed);

    let _ = writeln!(t, "## Classification\n");
    let _ = writeln!(t, "classifier: {} ({} folds)", ev.classifier, ev.folds);
    let _ = writeln!(t, "rows: {} input, {} after dedup", train.n_input, train.n_deduplicated);
    let _ = writeln!(
        t,
        "features: {} of {} terms (percentile {})",
        train.selected_features, train.vocabulary_size, train.percentile
    );
    let _ = writeln!(t, "accuracy:        {:.2} %", 100.0 * ev.accuracy);
    let _ = writeln!(t, "macro precision: {:.2} %", 100.0 * ev.macro_precision);
    let _ = writeln!(t, "macro recall:    {:.2} %", 100.0 * ev.macro_recall);
    let _ = writeln!(t, "training time:   {:.3} s per fold\n", ev.training_time_s);

    let _ = writeln!(t, "## Explanations\n");
    let _ = writeln!(t, "metric: {}, transactions: {}", explain.metric, s.total);
    for (k, v) in &s.percentages {
        let _ = writeln!(t, "{k:<14}{v:6.2} %");
    }
    if let Some(five) = &s.five_way {
        let _ = writeln!(t, "\nwith human review:");
        for k in ["validated", "obvious", "coherent", "ambiguous", "empty", "unreviewed"] {
            let _ = writeln!(t, "{k:<14}{:6.2} %", five.get(k).copied().unwrap_or(0.0));
        }
    }
    let _ = writeln!(t);

    let _ = writeln!(t, "## Carbon footprint\n");
    for (sector, kg) in &footprint.totals_kg_by_sector {
        let _ = writeln!(t, "{:<18}{kg:12.3} kg CO2", sector.as_str());
    }
    let _ = writeln!(t, "{:<18}{:12.3} kg CO2", "total", footprint.total_kg);
    let _ = writeln!(t, "{:<18}{:12.3} L", "water", footprint.water_liters);
    let _ = writeln!(t);

    let _ = writeln!(t, "## Gates\n");
    let results: Vec<GateResult> = gates
        .iter()
        .map(|&gate| {
            let observed = match gate.metric {
                GateMetric::MinAccuracy => ev.accuracy,
                GateMetric::MinMacroPrecision => ev.macro_precision,
                GateMetric::MinMacroRecall => ev.macro_recall,
                GateMetric::MinValidated => pct(s, "validated"),
                GateMetric::MinSatisfactory => pct(s, "validated") + pct(s, "obvious"),
                GateMetric::MaxEmpty => pct(s, "empty"),
            };
            let passed = match gate.metric {
                GateMetric::MaxEmpty => observed <= gate.threshold,
                _ => observed >= gate.threshold,
            };
            GateResult { gate, observed, passed }
        })
        .collect();
    if results.is_empty() {
        let _ = writeln!(t, "no gates configured");
    }
    for r in &results {
        let _ = writeln!(
            t,
            "{} {} (observed {:.4})",
            if r.passed { "PASS" } else { "FAIL" },
            r.gate,
            r.observed
        );
    }
    ReportOutcome { text: t, gates: results }
}

pub fn cmd_report(
    train_report: &Path,
    explain_summary: &Path,
    footprint: &Path,
    gates: &[Gate],
) -> Result<ReportOutcome, PipelineError> {
    let train: TrainReport = read_json(train_report)?;
    let explain: ExplainReport = read_json(explain_summary)?;
    let fp: FootprintReport = read_json(footprint)?;
    Ok(render_report(&train, &explain, &fp, gates))
}

/// Builds the sector lexicon from an enterprise corpus.
pub fn cmd_lexicon(cfg: &PipelineConfig, out: &Path) -> Result<SectorLexicon, PipelineError> {
    let res = Resources::load(cfg)?;
    let lex = build_lexicon(res.enterprises.records(), &res.normalization)?;
    write_bytes(out, lex.to_json().as_bytes())?;
    Ok(lex)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_parsing() {
        let g: Gate = "min_validated=0.9".parse().unwrap();
        assert_eq!(g.metric, GateMetric::MinValidated);
        assert_eq!(g.to_string(), "min_validated=0.9");
        for bad in ["min_validated", "nope=0.5", "min_accuracy=1.5", "max_empty=x"] {
            assert!(bad.parse::<Gate>().is_err(), "{bad}");
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"classifier": "rf", "seed": 3}"#).unwrap();
        assert_eq!(cfg.folds, 10);
        match cfg.classifier_params() {
            ClassifierParams::Rf(p) => assert_eq!(p.seed, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.explain_settings().seed, 3);
        let cfg = PipelineConfig {
            lexicon: Some("/definitely/not/here.json".into()),
            ..PipelineConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn summary_path_sits_next_to_output() {
        assert_eq!(summary_path(Path::new("out/x.jsonl")), Path::new("out/x.summary.json"));
    }
}
