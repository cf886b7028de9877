//! Exact predictive-multiplicity measurement for linear 0-1 loss classifiers.

pub mod adhoc;
pub mod bnb;
pub mod data;
pub mod error;
pub mod formulation;
pub mod lp;
pub mod path;
pub mod synthetic;

pub use data::{
    conflict_count, empirical_risk, find_conflict_pairs, oversample_minority, predict,
    ConflictReport, Dataset, Example, Label, LinearClassifier, RiskReport,
};
pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
