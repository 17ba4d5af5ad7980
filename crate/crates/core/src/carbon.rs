//! CO₂ and water estimates from transaction amounts.
//!
//! Every sector converts the amount into a physical quantity through an
//! average price and, except water, multiplies by an emission factor.

use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SectorLabel, Transaction};
use crate::scalar::Real;
use crate::textprep::ProcessedDoc;

const SHIPPED_PARAMS: &str = include_str!("../data/emission_params.json");

pub const DEFAULT_TAXI_KEYWORDS: [&str; 2] = ["taxi", "lic"];

#[derive(Debug, Error)]
pub enum CarbonError {
    #[error("invalid price parameter")]
    InvalidPrice,
    #[error("negative amount")]
    NegativeAmount,
    #[error("daily price series is empty")]
    EmptySeries,
    #[error("no emission parameters for {sector} at {date}")]
    MissingParams { sector: SectorLabel, date: String },
    #[error("emission parameters: {0}")]
    BadParams(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `p / avp · ε`.
pub fn emission_estimate<T: Real>(p: T, avp: T, epsilon: T) -> Result<T, CarbonError> {
    if !(avp > T::zero()) || !avp.is_finite() {
        return Err(CarbonError::InvalidPrice);
    }
    if p < T::zero() {
        return Err(CarbonError::NegativeAmount);
    }
    Ok(p / avp * epsilon)
}

/// Liters of water paid for: `p / avp_w`.
pub fn water_consumption<T: Real>(p: T, avp_w: T) -> Result<T, CarbonError> {
    emission_estimate(p, avp_w, T::one())
}

/// Mean of the previous month's daily prices.
pub fn monthly_average_price<T: Real>(kwp: &[T]) -> Result<T, CarbonError> {
    if kwp.is_empty() {
        return Err(CarbonError::EmptySeries);
    }
    if kwp.iter().any(|&v| !(v > T::zero())) {
        return Err(CarbonError::InvalidPrice);
    }
    Ok(kwp.iter().copied().sum::<T>() / T::of_usize(kwp.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportProfile {
    Taxi,
    Company,
}

impl fmt::Display for TransportProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Taxi => "taxi",
            Self::Company => "company",
        })
    }
}

/// Taxi when any keyword is among the lemmas.
pub fn discriminate_private_transport<S: AsRef<str>>(doc: &ProcessedDoc, keywords: &[S]) -> TransportProfile {
    let hit = doc
        .lemmas
        .iter()
        .any(|l| keywords.iter().any(|k| k.as_ref() == l));
    if hit {
        TransportProfile::Taxi
    } else {
        TransportProfile::Company
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamExtras {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<TransportProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxi_keywords: Option<Vec<String>>,
    /// Daily EUR/kWh prices of the previous month.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kwp_series: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub sector: SectorLabel,
    pub avp: f64,
    pub avp_unit: String,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_from: Option<NaiveDate>,
    #[serde(default)]
    pub extras: ParamExtras,
}

impl ParamEntry {
    fn profile(&self) -> Option<TransportProfile> {
        self.extras.profile
    }
}

/// Dated per-sector price and emission-factor table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamEntry>", into = "Vec<ParamEntry>")]
pub struct EmissionParams {
    entries: Vec<ParamEntry>,
}

impl TryFrom<Vec<ParamEntry>> for EmissionParams {
    type Error = CarbonError;

    fn try_from(entries: Vec<ParamEntry>) -> Result<Self, CarbonError> {
        let bad = |m: String| Err(CarbonError::BadParams(m));
        for (i, e) in entries.iter().enumerate() {
            let at = format!("entry {i} ({})", e.sector);
            if !(e.avp > 0.0) || !e.avp.is_finite() {
                return bad(format!("{at}: avp must be positive"));
            }
            if !(e.epsilon >= 0.0) || !e.epsilon.is_finite() {
                return bad(format!("{at}: epsilon must be non-negative"));
            }
            if e.avp_unit.trim().is_empty() {
                return bad(format!("{at}: missing avp_unit"));
            }
            if e.sector != SectorLabel::WaterBill && e.epsilon_unit.as_deref().is_none_or(|u| u.trim().is_empty()) {
                return bad(format!("{at}: missing epsilon_unit"));
            }
            let private = e.sector == SectorLabel::PrivateTransport;
            if private != e.profile().is_some() {
                return bad(format!("{at}: profile is required for private transport and only there"));
            }
            if let Some(k) = &e.extras.taxi_keywords {
                if k.is_empty() || k.iter().any(|w| w.trim().is_empty()) {
                    return bad(format!("{at}: taxi_keywords must be a nonempty list of words"));
                }
            }
            if let Some(s) = &e.extras.kwp_series {
                if s.is_empty() || s.iter().any(|&v| !(v > 0.0)) {
                    return bad(format!("{at}: kwp_series must be nonempty and positive"));
                }
            }
            let dup = entries[..i]
                .iter()
                .any(|o| o.sector == e.sector && o.profile() == e.profile() && o.valid_from == e.valid_from);
            if dup {
                return bad(format!("{at}: duplicate validity window"));
            }
        }
        Ok(Self { entries })
    }
}

impl From<EmissionParams> for Vec<ParamEntry> {
    fn from(p: EmissionParams) -> Self {
        p.entries
    }
}

impl EmissionParams {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_PARAMS).expect("bundled emission parameters are valid")
    }

    pub fn from_json(json: &str) -> Result<Self, CarbonError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self, CarbonError> {
        let text = std::fs::read_to_string(path).map_err(|source| CarbonError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    /// Entry in force on `date`: the latest `valid_from` not after it, with
    /// dateless entries as the fallback. Undated transactions take the
    /// dateless entry, else the most recent one.
    pub fn lookup(
        &self,
        sector: SectorLabel,
        profile: Option<TransportProfile>,
        date: Option<NaiveDate>,
    ) -> Result<&ParamEntry, CarbonError> {
        let candidates = self
            .entries
            .iter()
            .filter(|e| e.sector == sector && e.profile() == profile);
        let found = match date {
            Some(d) => candidates
                .filter(|e| e.valid_from.is_none_or(|v| v <= d))
                .max_by_key(|e| e.valid_from),
            None => candidates.max_by_key(|e| e.valid_from.map_or((1, None), |v| (0, Some(v)))),
        };
        found.ok_or_else(|| CarbonError::MissingParams {
            sector,
            date: date.map_or("any date".to_string(), |d| d.to_string()),
        })
    }

    pub fn taxi_keywords(&self, date: Option<NaiveDate>) -> Vec<String> {
        self.lookup(SectorLabel::PrivateTransport, Some(TransportProfile::Taxi), date)
            .ok()
            .and_then(|e| e.extras.taxi_keywords.clone())
            .unwrap_or_else(|| DEFAULT_TAXI_KEYWORDS.iter().map(|s| s.to_string()).collect())
    }

    /// Sectors for which no entry at all exists.
    pub fn uncovered(&self, sectors: impl IntoIterator<Item = SectorLabel>) -> Vec<SectorLabel> {
        let mut out: Vec<SectorLabel> = sectors
            .into_iter()
            .filter(|&s| {
                if s == SectorLabel::PrivateTransport {
                    [TransportProfile::Taxi, TransportProfile::Company]
                        .iter()
                        .any(|&p| !self.entries.iter().any(|e| e.sector == s && e.profile() == Some(p)))
                } else {
                    !self.entries.iter().any(|e| e.sector == s)
                }
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "kg")]
    KgCo2,
    #[serde(rename = "L")]
    Liters,
}

/// Formula applied, numbered as in the sector list: fuel, taxi or company
/// ride, public transport, flight, parcel, water, energy bill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Eq1,
    Eq2,
    Eq3,
    Eq4,
    Eq5,
    Eq6,
    Eq7,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametersUsed {
    pub avp: f64,
    pub avp_unit: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_unit: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<TransportProfile>,
    /// True when `avp` is the mean of a daily price series.
    pub from_daily_series: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_from: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintEstimate<T> {
    pub transaction_id: String,
    pub sector: SectorLabel,
    pub amount_eur: f64,
    pub quantity: T,
    pub unit: Unit,
    pub formula_id: Formula,
    pub parameters_used: ParametersUsed,
}

pub fn formula_for(sector: SectorLabel) -> Formula {
    match sector {
        SectorLabel::GasStations => Formula::Eq1,
        SectorLabel::PrivateTransport => Formula::Eq2,
        SectorLabel::PublicTransport => Formula::Eq3,
        SectorLabel::Flights => Formula::Eq4,
        SectorLabel::ParcelCourier => Formula::Eq5,
        SectorLabel::WaterBill => Formula::Eq6,
        SectorLabel::ElectricityBill | SectorLabel::GasBill => Formula::Eq7,
    }
}

pub fn estimate_footprint<T: Real>(
    t: &Transaction,
    predicted: SectorLabel,
    doc: &ProcessedDoc,
    params: &EmissionParams,
) -> Result<FootprintEstimate<T>, CarbonError> {
    let profile = (predicted == SectorLabel::PrivateTransport)
        .then(|| discriminate_private_transport(doc, &params.taxi_keywords(t.date)));
    let entry = params.lookup(predicted, profile, t.date)?;
    let series = match predicted {
        SectorLabel::ElectricityBill | SectorLabel::GasBill => entry.extras.kwp_series.as_deref(),
        _ => None,
    };
    let avp = match series {
        Some(s) => monthly_average_price(&s.iter().map(|&v| T::of(v)).collect::<Vec<T>>())?,
        None => T::of(entry.avp),
    };
    let p = T::of(t.amount_eur);
    let water = predicted == SectorLabel::WaterBill;
    let quantity = if water {
        water_consumption(p, avp)?
    } else {
        emission_estimate(p, avp, T::of(entry.epsilon))?
    };
    Ok(FootprintEstimate {
        transaction_id: t.id.clone(),
        sector: predicted,
        amount_eur: t.amount_eur,
        quantity,
        unit: if water { Unit::Liters } else { Unit::KgCo2 },
        formula_id: formula_for(predicted),
        parameters_used: ParametersUsed {
            avp: avp.as_f64(),
            avp_unit: entry.avp_unit.clone(),
            epsilon: (!water).then_some(entry.epsilon),
            epsilon_unit: if water { None } else { entry.epsilon_unit.clone() },
            profile,
            from_daily_series: series.is_some(),
            valid_from: entry.valid_from,
        },
    })
}
