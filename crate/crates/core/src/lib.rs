//! Explainable classification of bank transactions into carbon-relevant
//! sectors, with per-transaction CO₂ and water estimates.
//!
//! The numeric core is generic over [`Real`]; the aliases below fix it to
//! `f64`, which is what the command-line tool uses.

pub mod carbon;
pub mod classify;
pub mod corpus;
pub mod explain;
pub mod features;
pub mod linalg;
pub mod pipeline;
pub mod scalar;
pub mod textprep;

pub use corpus::{SectorLabel, Transaction, N_SECTORS};
pub use scalar::Real;
pub use textprep::{NormalizationConfig, ProcessedDoc};

pub type Classifier = classify::TrainedClassifier<f64>;
pub type Space = features::FeatureSpace<f64>;
pub type Vector = features::FeatureVector<f64>;
pub type Surrogate = explain::SurrogateFit<f64>;
pub type Footprint = carbon::FootprintEstimate<f64>;
