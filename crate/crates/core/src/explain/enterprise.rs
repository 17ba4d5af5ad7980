//! Local enterprise corpus, description summarization and sector lexicons.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::corpus::SectorLabel;
use crate::textprep::{preprocess_text, NormalizationConfig, PartOfSpeech, ProcessedDoc};

pub const MAX_ENTERPRISE_TERMS: usize = 10;
pub const VERBS_PER_ENTERPRISE: usize = 5;
pub const ENTERPRISES_PER_SECTOR: usize = 6;

const SHIPPED_ENTERPRISES: &str = include_str!("../../data/enterprises.json");
const SHIPPED_LEXICON: &str = include_str!("../../data/sector_lexicon.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnterpriseRecord {
    pub name: String,
    pub sector: SectorLabel,
    pub description: String,
}

pub fn parse_enterprises(json: &str) -> Result<Vec<EnterpriseRecord>, ExplainError> {
    Ok(serde_json::from_str(json)?)
}

pub fn load_enterprises(path: &Path) -> Result<Vec<EnterpriseRecord>, ExplainError> {
    parse_enterprises(&super::read_file(path)?)
}

pub fn shipped_enterprises() -> Vec<EnterpriseRecord> {
    parse_enterprises(SHIPPED_ENTERPRISES).expect("bundled enterprise corpus is valid")
}

/// Most frequent lemmas of `doc` accepted by `keep`, ties alphabetical.
fn ranked(doc: &ProcessedDoc, limit: usize, keep: impl Fn(&str) -> bool) -> Vec<String> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for l in doc.lemmas.iter().filter(|l| keep(l)) {
        *freq.entry(l.as_str()).or_default() += 1;
    }
    let mut terms: Vec<(&str, usize)> = freq.into_iter().collect();
    terms.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    terms.into_iter().take(limit).map(|(t, _)| t.to_string()).collect()
}

/// Up to ten noun-like lemmas of the description, most frequent first.
/// A lemma is noun-like when tagged as a noun or not tagged at all.
pub fn select_enterprise_terms(e: &EnterpriseRecord, cfg: &NormalizationConfig) -> Vec<String> {
    let doc = preprocess_text(&e.description, cfg);
    ranked(&doc, MAX_ENTERPRISE_TERMS, |l| {
        matches!(cfg.pos_of(l), None | Some(PartOfSpeech::Noun))
    })
}

/// Up to `limit` lemmas tagged as verbs, most frequent first.
pub fn select_enterprise_verbs(e: &EnterpriseRecord, cfg: &NormalizationConfig, limit: usize) -> Vec<String> {
    let doc = preprocess_text(&e.description, cfg);
    ranked(&doc, limit, |l| cfg.pos_of(l) == Some(PartOfSpeech::Verb))
}

/// Enterprise records with precomputed match keys and summary terms.
#[derive(Debug, Clone)]
pub struct EnterpriseIndex {
    records: Vec<EnterpriseRecord>,
    keys: Vec<Vec<String>>,
    terms: Vec<Vec<String>>,
}

impl EnterpriseIndex {
    pub fn new(records: Vec<EnterpriseRecord>, cfg: &NormalizationConfig) -> Result<Self, ExplainError> {
        let mut seen = HashSet::new();
        let mut keys = Vec::with_capacity(records.len());
        for r in &records {
            let key = preprocess_text(&r.name, cfg).lemmas;
            if key.is_empty() {
                return Err(ExplainError::BadEnterprise(format!("name {:?} normalizes to nothing", r.name)));
            }
            if !seen.insert(key.clone()) {
                return Err(ExplainError::BadEnterprise(format!("duplicate name {:?}", r.name)));
            }
            keys.push(key);
        }
        let terms = records.iter().map(|r| select_enterprise_terms(r, cfg)).collect();
        Ok(Self { records, keys, terms })
    }

    pub fn empty() -> Self {
        Self {
            records: Vec::new(),
            keys: Vec::new(),
            terms: Vec::new(),
        }
    }

    pub fn records(&self) -> &[EnterpriseRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn terms(&self, i: usize) -> &[String] {
        &self.terms[i]
    }

    pub fn match_key(&self, i: usize) -> &[String] {
        &self.keys[i]
    }

    /// Records whose normalized name occurs as a contiguous run of lemmas.
    pub fn matches(&self, doc: &ProcessedDoc) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| {
                let k = &self.keys[i];
                doc.lemmas.windows(k.len()).any(|w| w == k.as_slice())
            })
            .collect()
    }

    pub fn by_name(&self, name: &str) -> Option<usize> {
        self.records.iter().position(|r| r.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorBag {
    pub nouns: Vec<String>,
    pub verbs: Vec<String>,
}

impl SectorBag {
    pub fn terms(&self) -> Vec<&str> {
        self.nouns.iter().chain(&self.verbs).map(String::as_str).collect()
    }
}

/// Per-sector bags of representative nouns and verbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<SectorLabel, SectorBag>", into = "BTreeMap<SectorLabel, SectorBag>")]
pub struct SectorLexicon {
    bags: BTreeMap<SectorLabel, SectorBag>,
}

impl TryFrom<BTreeMap<SectorLabel, SectorBag>> for SectorLexicon {
    type Error = ExplainError;

    fn try_from(bags: BTreeMap<SectorLabel, SectorBag>) -> Result<Self, Self::Error> {
        for s in SectorLabel::ALL {
            match bags.get(&s) {
                Some(b) if !b.nouns.is_empty() || !b.verbs.is_empty() => {}
                _ => return Err(ExplainError::BadLexicon(format!("sector {s} has no terms"))),
            }
        }
        Ok(Self { bags })
    }
}

impl From<SectorLexicon> for BTreeMap<SectorLabel, SectorBag> {
    fn from(l: SectorLexicon) -> Self {
        l.bags
    }
}

impl SectorLexicon {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, ExplainError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self, ExplainError> {
        Self::from_json(&super::read_file(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lexicon serializes") + "\n"
    }

    pub fn bag(&self, sector: SectorLabel) -> &SectorBag {
        &self.bags[&sector]
    }

    pub fn terms(&self, sector: SectorLabel) -> Vec<&str> {
        self.bag(sector).terms()
    }
}

/// Builds the lexicon from the first six enterprises of each sector (file
/// order): ten nouns and five verbs per enterprise, deduplicated in order.
pub fn build_lexicon(
    records: &[EnterpriseRecord],
    cfg: &NormalizationConfig,
) -> Result<SectorLexicon, ExplainError> {
    let mut bags: BTreeMap<SectorLabel, SectorBag> = BTreeMap::new();
    for s in SectorLabel::ALL {
        let bag = bags.entry(s).or_default();
        for e in records.iter().filter(|e| e.sector == s).take(ENTERPRISES_PER_SECTOR) {
            for t in select_enterprise_terms(e, cfg) {
                if !bag.nouns.contains(&t) {
                    bag.nouns.push(t);
                }
            }
            for t in select_enterprise_verbs(e, cfg, VERBS_PER_ENTERPRISE) {
                if !bag.verbs.contains(&t) {
                    bag.verbs.push(t);
                }
            }
        }
    }
    SectorLexicon::try_from(bags)
}
