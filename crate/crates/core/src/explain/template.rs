use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExplainError, Explanation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Es,
    En,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Es => "es",
            Self::En => "en",
        })
    }
}

impl FromStr for Language {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "es" => Ok(Self::Es),
            "en" => Ok(Self::En),
            other => Err(ExplainError::InvalidSetting(format!("unknown language {other:?}"))),
        }
    }
}

pub const NO_TERMS_EN: &str = "(no representative terms)";
pub const NO_TERMS_ES: &str = "(sin términos representativos)";

/// Fills the explanation template; the Spanish wording is kept verbatim,
/// including "en order decreciente".
pub fn render_template(x: &Explanation, language: Language) -> String {
    let terms: Vec<&str> = x.terms.iter().map(|t| t.term.as_str()).collect();
    let list = match (terms.is_empty(), language) {
        (true, Language::En) => NO_TERMS_EN.to_string(),
        (true, Language::Es) => NO_TERMS_ES.to_string(),
        (false, _) => terms.join(", "),
    };
    match language {
        Language::En => format!(
            "The classification of transaction {} into the category {} can be explained by relevant terms: (in decreasing order) {}.",
            x.transaction_id,
            x.predicted.name_en(),
            list
        ),
        Language::Es => format!(
            "La clasificación del movimiento {} en la categoría {} puede explicarse en order decreciente por los términos relevantes: {}.",
            x.transaction_id,
            x.predicted.name_es(),
            list
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SectorLabel;
    use crate::explain::{Verdict, WeightedTerm};

    fn x(terms: &[&str]) -> Explanation {
        let mut e = Explanation::empty("423", SectorLabel::GasStations);
        e.terms = terms
            .iter()
            .enumerate()
            .map(|(i, t)| WeightedTerm {
                term: t.to_string(),
                weight: 1.0 / (i + 1) as f64,
            })
            .collect();
        e.verdict = Verdict::Validated;
        e
    }

    #[test]
    fn english_gas_station_example() {
        assert_eq!(
            render_template(&x(&["cedipsa", "servicio", "estacion"]), Language::En),
            "The classification of transaction 423 into the category car and transport - gas stations \
             can be explained by relevant terms: (in decreasing order) cedipsa, servicio, estacion."
        );
    }

    #[test]
    fn spanish_wording() {
        let s = render_template(&x(&["agua"]), Language::Es);
        assert!(s.starts_with("La clasificación del movimiento 423 en la categoría "), "{s}");
        assert!(s.ends_with("puede explicarse en order decreciente por los términos relevantes: agua."));
    }

    #[test]
    fn empty_marker() {
        assert!(render_template(&x(&[]), Language::En).ends_with("(in decreasing order) (no representative terms)."));
        assert!(render_template(&x(&[]), Language::Es).ends_with(": (sin términos representativos)."));
    }
}
